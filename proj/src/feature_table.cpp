#include "photoscore/feature_table.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "photoscore/csv.hpp"
#include "photoscore/error.hpp"

namespace photoscore {

namespace {

constexpr std::string_view kHeader =
    "image_id,width,height,resolution,brightness,contrast,dynamic_range,object_cnt,has_detection,"
    "top_space,bottom_space,left_space,right_space,x_asymmetry,y_asymmetry,fgbg_area_ratio,"
    "bgfg_brightness_diff,bgfg_contrast_diff,bg_lightness,bg_nonuniformity,label";

std::optional<double> widen(std::optional<int> v) {
    return v ? std::optional<double>(*v) : std::nullopt;
}

std::string cell(std::optional<double> v) { return v ? format_real(*v) : std::string(); }

}  // namespace

std::array<std::optional<double>, 18> feature_values(const FeatureVector& f) {
    const GlobalFeatures& g = f.global;
    const ObjectFeatures& o = f.object;
    std::array<std::optional<double>, 18> v;
    v[0] = g.width;
    v[1] = g.height;
    v[2] = g.resolution;
    v[3] = g.brightness;
    v[4] = g.contrast;
    v[5] = g.dynamic_range;
    v[6] = o.object_cnt;
    v[7] = widen(o.top_space);
    v[8] = widen(o.bottom_space);
    v[9] = widen(o.left_space);
    v[10] = widen(o.right_space);
    v[11] = o.x_asymmetry;
    v[12] = o.y_asymmetry;
    if (f.regional) {
        v[13] = f.regional->fgbg_area_ratio;
        v[14] = f.regional->bgfg_brightness_diff;
        v[15] = f.regional->bgfg_contrast_diff;
        v[16] = f.regional->bg_lightness;
        v[17] = f.regional->bg_nonuniformity;
    }
    return v;
}

std::string_view feature_csv_header() { return kHeader; }

std::string feature_table_to_csv(std::span<const FeatureRecord> records) {
    std::string out(kHeader);
    out += '\n';
    for (const FeatureRecord& r : records) {
        const auto v = feature_values(r.features);
        const bool detected = r.features.object.has_detection;
        out += r.image_id;
        for (std::size_t i = 0; i < 6; ++i) out += "," + cell(v[i]);
        // without a detection every object column is blank, the count included
        out += "," + (detected ? cell(v[6]) : std::string());
        out += detected ? ",1" : ",0";
        for (std::size_t i = 7; i < 18; ++i) out += "," + cell(v[i]);
        out += ",";
        if (r.label) out += std::to_string(static_cast<int>(*r.label));
        out += '\n';
    }
    return out;
}

void write_feature_table(std::span<const FeatureRecord> records, const std::filesystem::path& path) {
    if (records.empty()) throw Error("feature table has no records");
    const std::string text = feature_table_to_csv(records);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<FeatureRecord> parse_feature_table(std::string_view text, std::string_view source) {
    const CsvTable t = CsvTable::parse(text, source);
    std::string joined;
    for (std::size_t i = 0; i < t.header().size(); ++i) joined += (i ? "," : "") + t.header()[i];
    if (joined != kHeader) throw ParseError(std::string(source), 1, "unexpected feature table header");

    std::vector<FeatureRecord> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const std::size_t line = r + 2;
        auto num = [&](std::size_t col) { return t.number(r, col); };
        auto need = [&](std::size_t col) {
            const auto v = num(col);
            if (!v) throw ParseError(std::string(source), line, "field '" + t.header()[col] + "' is empty");
            return *v;
        };
        auto as_int = [&](std::optional<double> v) -> std::optional<int> {
            if (!v) return std::nullopt;
            return static_cast<int>(std::lround(*v));
        };

        FeatureRecord rec;
        rec.image_id = t.cell(r, 0);
        if (rec.image_id.empty()) throw ParseError(std::string(source), line, "field 'image_id' is empty");
        GlobalFeatures& g = rec.features.global;
        g.width = static_cast<int>(std::lround(need(1)));
        g.height = static_cast<int>(std::lround(need(2)));
        g.resolution = need(3);
        g.brightness = need(4);
        g.contrast = need(5);
        g.dynamic_range = need(6);

        ObjectFeatures& o = rec.features.object;
        const double detected = need(8);
        if (detected != 0.0 && detected != 1.0)
            throw ParseError(std::string(source), line, "field 'has_detection': must be 0 or 1");
        o.has_detection = detected == 1.0;
        o.object_cnt = as_int(num(7)).value_or(0);
        o.top_space = as_int(num(9));
        o.bottom_space = as_int(num(10));
        o.left_space = as_int(num(11));
        o.right_space = as_int(num(12));
        o.x_asymmetry = num(13);
        o.y_asymmetry = num(14);

        if (const auto ratio = num(15)) {
            RegionalFeatures reg;
            reg.fgbg_area_ratio = *ratio;
            reg.bgfg_brightness_diff = num(16);
            reg.bgfg_contrast_diff = num(17);
            reg.bg_lightness = num(18);
            reg.bg_nonuniformity = num(19);
            rec.features.regional = reg;
        }
        if (const auto label = num(20)) {
            if (*label != 0.0 && *label != 1.0 && *label != 2.0)
                throw ParseError(std::string(source), line, "field 'label': must be 0, 1 or 2");
            rec.label = static_cast<QualityLabel>(static_cast<int>(*label));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<FeatureRecord> read_feature_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_feature_table(text, path.string());
}

}  // namespace photoscore
