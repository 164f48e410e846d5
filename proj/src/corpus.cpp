#include "photoscore/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "photoscore/codec.hpp"
#include "photoscore/error.hpp"

namespace photoscore {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct LineContext {
    std::string_view source;
    std::size_t line;

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ParseError(std::string(source), line, "field '" + field + "': " + what);
    }
};

const json& require(const json& obj, const char* key, const LineContext& ctx,
                    const std::string& prefix = {}) {
    auto it = obj.find(key);
    if (it == obj.end()) ctx.fail(prefix + key, "missing");
    return *it;
}

std::string get_string(const json& obj, const char* key, const LineContext& ctx,
                       const std::string& prefix = {}) {
    const json& v = require(obj, key, ctx, prefix);
    if (!v.is_string()) ctx.fail(prefix + key, "expected a string");
    return v.get<std::string>();
}

long long get_int(const json& obj, const char* key, const LineContext& ctx,
                  const std::string& prefix = {}) {
    const json& v = require(obj, key, ctx, prefix);
    if (!v.is_number_integer()) ctx.fail(prefix + key, "expected an integer");
    return v.get<long long>();
}

std::optional<double> get_optional_real(const json& obj, const char* key, const LineContext& ctx,
                                        const std::string& prefix) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) ctx.fail(prefix + key, "expected a number or null");
    return it->get<double>();
}

Detection parse_detection(const json& d, const LineContext& ctx, const std::string& prefix) {
    if (!d.is_object()) ctx.fail(prefix, "expected an object");
    Detection det;
    det.box.left = static_cast<int>(get_int(d, "left", ctx, prefix + "."));
    det.box.top = static_cast<int>(get_int(d, "top", ctx, prefix + "."));
    det.box.right = static_cast<int>(get_int(d, "right", ctx, prefix + "."));
    det.box.bottom = static_cast<int>(get_int(d, "bottom", ctx, prefix + "."));
    if (det.box.left < 0 || det.box.top < 0 || det.box.left >= det.box.right ||
        det.box.top >= det.box.bottom)
        ctx.fail(prefix, "degenerate or negative box");
    if (auto c = get_optional_real(d, "conf", ctx, prefix + ".")) {
        if (*c < 0.0 || *c > 1.0) ctx.fail(prefix + ".conf", "confidence outside [0,1]");
        det.confidence = c;
    }
    return det;
}

ListingMeta parse_listing(const json& l, const LineContext& ctx) {
    if (!l.is_object()) ctx.fail("listing", "expected an object");
    ListingMeta m;
    m.listing_id = get_string(l, "listing_id", ctx, "listing.");
    m.days_listed = get_int(l, "days", ctx, "listing.");
    if (m.days_listed < 0) ctx.fail("listing.days", "must be >= 0");
    m.view_count = get_int(l, "views", ctx, "listing.");
    if (m.view_count < 0) ctx.fail("listing.views", "must be >= 0");
    const json& price = require(l, "price", ctx, "listing.");
    if (!price.is_number()) ctx.fail("listing.price", "expected a number");
    m.price = price.get<double>();
    if (!(m.price > 0.0)) ctx.fail("listing.price", "must be > 0");
    const json& sold = require(l, "sold", ctx, "listing.");
    if (!sold.is_boolean()) ctx.fail("listing.sold", "expected a boolean");
    m.sold = sold.get<bool>();
    m.aesthetic_score = get_optional_real(l, "aesthetic", ctx, "listing.");
    m.quality_score = get_optional_real(l, "quality", ctx, "listing.");
    return m;
}

ImageRecord parse_record(const json& obj, const LineContext& ctx) {
    if (!obj.is_object()) ctx.fail("<record>", "expected a JSON object");
    ImageRecord rec;
    rec.image_id = get_string(obj, "image_id", ctx);
    if (rec.image_id.empty()) ctx.fail("image_id", "must be non-empty");
    rec.path = get_string(obj, "path", ctx);
    rec.category = get_string(obj, "category", ctx);
    if (rec.category != "shoe" && rec.category != "handbag")
        ctx.fail("category", "expected \"shoe\" or \"handbag\"");

    if (auto it = obj.find("detections"); it != obj.end() && !it->is_null()) {
        if (!it->is_array()) ctx.fail("detections", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            rec.detections.push_back(
                parse_detection((*it)[i], ctx, "detections[" + std::to_string(i) + "]"));
    }
    if (auto it = obj.find("ratings"); it != obj.end() && !it->is_null()) {
        if (!it->is_array()) ctx.fail("ratings", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const json& r = (*it)[i];
            const std::string prefix = "ratings[" + std::to_string(i) + "].";
            if (!r.is_object()) ctx.fail(prefix, "expected an object");
            RatingRecord rr;
            rr.image_id = rec.image_id;
            rr.rater_id = get_string(r, "rater_id", ctx, prefix);
            const long long score = get_int(r, "score", ctx, prefix);
            if (score < 1 || score > 5)
                ctx.fail(prefix + "score", "rating " + std::to_string(score) + " outside [1,5]");
            rr.raw_score = static_cast<int>(score);
            rec.ratings.push_back(std::move(rr));
        }
    }
    if (auto it = obj.find("listing"); it != obj.end() && !it->is_null())
        rec.listing = parse_listing(*it, ctx);
    return rec;
}

}  // namespace

ListingCorpus::ListingCorpus(std::vector<ImageRecord> images, std::filesystem::path base_dir)
    : images_(std::move(images)), base_dir_(std::move(base_dir)) {
    std::set<std::string, std::less<>> seen_listings;
    for (std::size_t i = 0; i < images_.size(); ++i) {
        ImageRecord& rec = images_[i];
        if (!index_.emplace(rec.image_id, i).second)
            throw Error("duplicate image_id '" + rec.image_id + "'");
        for (const RatingRecord& r : rec.ratings)
            if (r.image_id != rec.image_id)
                throw Error("rating for unknown image '" + r.image_id + "'");
        if (rec.listing)
            rec.primary_for_listing = seen_listings.insert(rec.listing->listing_id).second;
    }
}

const ImageRecord* ListingCorpus::find(std::string_view image_id) const {
    auto it = index_.find(image_id);
    return it == index_.end() ? nullptr : &images_[it->second];
}

std::filesystem::path ListingCorpus::resolve(const ImageRecord& rec) const {
    std::filesystem::path p(rec.path);
    return p.is_absolute() ? p : base_dir_ / p;
}

std::vector<RatingRecord> ListingCorpus::all_ratings() const {
    std::vector<RatingRecord> out;
    for (const ImageRecord& rec : images_)
        out.insert(out.end(), rec.ratings.begin(), rec.ratings.end());
    return out;
}

std::vector<ListingMeta> ListingCorpus::listings() const {
    std::vector<ListingMeta> out;
    for (const ImageRecord& rec : images_)
        if (rec.listing && rec.primary_for_listing) out.push_back(*rec.listing);
    return out;
}

std::size_t ListingCorpus::rating_count() const {
    std::size_t n = 0;
    for (const ImageRecord& rec : images_) n += rec.ratings.size();
    return n;
}

ListingCorpus parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                             ManifestOptions opts, std::string_view source) {
    std::vector<ImageRecord> records;
    std::set<std::string, std::less<>> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        const LineContext ctx{source, line_no};

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string(source), line_no, std::string("malformed JSON: ") + e.what());
        }
        ImageRecord rec = parse_record(obj, ctx);
        if (!ids.insert(rec.image_id).second)
            ctx.fail("image_id", "duplicate image_id '" + rec.image_id + "'");

        if (opts.check_boxes_against_images && !rec.detections.empty()) {
            std::filesystem::path p(rec.path);
            if (!p.is_absolute()) p = base_dir / p;
            std::pair<int, int> dims;
            try {
                dims = probe_dimensions(read_file(p));
            } catch (const Error& e) {
                ctx.fail("path", e.what());
            }
            for (std::size_t i = 0; i < rec.detections.size(); ++i)
                if (!rec.detections[i].box.valid_for(dims.first, dims.second))
                    ctx.fail("detections[" + std::to_string(i) + "]",
                             "box outside the " + std::to_string(dims.first) + "x" +
                                 std::to_string(dims.second) + " image");
        }
        records.push_back(std::move(rec));
    }
    return ListingCorpus(std::move(records), base_dir);
}

ListingCorpus load_manifest(const std::filesystem::path& path, ManifestOptions opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), path.parent_path(), opts, path.string());
}

std::string manifest_to_string(const ListingCorpus& corpus) {
    std::string out;
    for (const ImageRecord& rec : corpus.images()) {
        ordered_json obj;
        obj["image_id"] = rec.image_id;
        obj["path"] = rec.path;
        obj["category"] = rec.category;
        if (!rec.detections.empty()) {
            ordered_json dets = ordered_json::array();
            for (const Detection& d : rec.detections) {
                ordered_json b;
                b["left"] = d.box.left;
                b["top"] = d.box.top;
                b["right"] = d.box.right;
                b["bottom"] = d.box.bottom;
                if (d.confidence) b["conf"] = *d.confidence;
                dets.push_back(std::move(b));
            }
            obj["detections"] = std::move(dets);
        }
        if (!rec.ratings.empty()) {
            ordered_json rs = ordered_json::array();
            for (const RatingRecord& r : rec.ratings)
                rs.push_back(ordered_json{{"rater_id", r.rater_id}, {"score", r.raw_score}});
            obj["ratings"] = std::move(rs);
        }
        if (rec.listing) {
            const ListingMeta& m = *rec.listing;
            ordered_json l;
            l["listing_id"] = m.listing_id;
            l["days"] = m.days_listed;
            l["views"] = m.view_count;
            l["price"] = m.price;
            l["sold"] = m.sold;
            l["aesthetic"] = m.aesthetic_score ? ordered_json(*m.aesthetic_score) : ordered_json();
            if (m.quality_score) l["quality"] = *m.quality_score;
            obj["listing"] = std::move(l);
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void write_manifest(const ListingCorpus& corpus, const std::filesystem::path& path) {
    const std::string text = manifest_to_string(corpus);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace photoscore
