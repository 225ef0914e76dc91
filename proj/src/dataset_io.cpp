#include "graspkit/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "graspkit/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace graspkit {

namespace {

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = 1ull << 28;

const char* kManifestHeader = "id,view,task,tool,split,feature_path,heatmap_path,landmarks_path";

bool contains(const std::vector<std::string>& vocab, const std::string& s) {
    return std::find(vocab.begin(), vocab.end(), s) != vocab.end();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

void validate_record(const ManifestRecord& r, const std::string& where) {
    if (r.view != "exo" && r.view != "ego")
        raise(Errc::vocabulary_error, where + ": unknown view '" + r.view + "'");
    if (r.split != "train" && r.split != "test")
        raise(Errc::vocabulary_error, where + ": unknown split '" + r.split + "'");
    if (!contains(task_vocabulary(), r.task))
        raise(Errc::vocabulary_error, where + ": unknown task '" + r.task + "'");
    if (!contains(tool_vocabulary(), r.tool))
        raise(Errc::vocabulary_error, where + ": unknown tool '" + r.tool + "'");
    if (r.view == "exo" && r.landmarks_path.empty())
        raise(Errc::data_inconsistency, where + ": exo record lacks landmarks_path");
    if (r.view == "ego" && r.split == "test" && r.heatmap_path.empty())
        raise(Errc::data_inconsistency, where + ": ego test record lacks heatmap_path");
}

json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) raise(Errc::parse_error, "invalid JSON in " + what);
    return j;
}

void append_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32(const std::string& s, std::size_t& off, const std::string& what) {
    if (off + 4 > s.size()) raise(Errc::truncated_file, what + ": header cut short");
    auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])); };
    std::uint32_t v = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
    off += 4;
    return v;
}

Tensor parse_tensor(const std::string& bytes, const std::string& what) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "GAFT") != 0)
        raise(Errc::bad_magic, what + ": not a GAFT file");
    std::size_t off = 4;
    std::uint32_t version = read_u32(bytes, off, what);
    if (version != 1) raise(Errc::bad_magic, what + ": unsupported GAFT version");
    std::uint32_t rank = read_u32(bytes, off, what);
    if (rank == 0 || rank > kMaxRank) raise(Errc::dim_limit, what + ": rank outside [1,8]");
    Tensor t;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint32_t d = read_u32(bytes, off, what);
        if (d == 0) raise(Errc::dim_limit, what + ": zero dimension");
        count *= d;
        if (count > kMaxElements) raise(Errc::dim_limit, what + ": tensor too large");
        t.dims.push_back(d);
    }
    if (off + 4 * count > bytes.size()) raise(Errc::truncated_file, what + ": data cut short");
    t.v.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::size_t o = off + 4 * i;
        auto b = [&](int k) {
            return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[o + k]));
        };
        std::uint32_t bits = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
        t.v[i] = std::bit_cast<float>(bits);
    }
    return t;
}

struct PgmCursor {
    const std::string& bytes;
    std::size_t off = 0;

    // whitespace and '#' comments separate header tokens
    void skip() {
        while (off < bytes.size()) {
            char c = bytes[off];
            if (c == '#') {
                while (off < bytes.size() && bytes[off] != '\n') ++off;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++off;
            } else {
                break;
            }
        }
    }

    int next_int(const std::string& what) {
        skip();
        std::size_t start = off;
        while (off < bytes.size() && bytes[off] >= '0' && bytes[off] <= '9') ++off;
        if (off == start) raise(Errc::parse_error, what + ": malformed PGM header");
        return std::stoi(bytes.substr(start, off - start));
    }
};

DenseMap parse_pgm(const std::string& bytes, const std::string& what) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        raise(Errc::parse_error, what + ": not a binary PGM");
    PgmCursor cur{bytes, 2};
    int w = cur.next_int(what);
    int h = cur.next_int(what);
    int maxval = cur.next_int(what);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        raise(Errc::parse_error, what + ": unsupported PGM geometry");
    ++cur.off; // single whitespace byte after maxval
    if (cur.off + static_cast<std::size_t>(w) * h > bytes.size())
        raise(Errc::truncated_file, what + ": pixel data cut short");
    DenseMap m(h, w);
    for (std::size_t i = 0; i < m.v.size(); ++i)
        m.v[i] = static_cast<unsigned char>(bytes[cur.off + i]) / static_cast<double>(maxval);
    return m;
}

int fold_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

GestureConfig placeholder_gesture(int id) {
    GestureConfig g;
    g.id = id;
    // placeholder angles, varied per gesture but well inside [0, pi/2]
    for (int k = 0; k < 5; ++k) g.flexion[k] = 0.2 + 0.05 * ((id * 7 + k * 3) % 10);
    g.abduction = 0.25 + 0.05 * (id % 4);
    return g;
}

} // namespace

std::size_t Tensor::count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

const std::vector<std::string>& task_vocabulary() {
    static const std::vector<std::string> tasks = {"Press", "Hold", "Click",
                                                   "Clamp", "Grip", "Open"};
    return tasks;
}

const std::vector<std::string>& tool_vocabulary() {
    static const std::vector<std::string> tools = {
        "screwdriver", "plug",    "kettle",   "hammer",     "spraybottle", "stapler",
        "flashlight",  "bottle",  "cup",      "mouse",      "knife",       "pliers",
        "spatula",     "scissors", "doorhandle", "lightswitch", "drill",   "valve"};
    return tools;
}

int task_index(const std::string& task) {
    const auto& tasks = task_vocabulary();
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i] == task) return static_cast<int>(i);
    raise(Errc::unknown_task, "unknown task '" + task + "'");
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
    std::string text = read_file(path);
    std::size_t first = text.find_first_not_of(" \t\r\n");
    std::vector<ManifestRecord> records;

    if (first != std::string::npos && text[first] == '[') {
        json j = parse_json(text, path);
        int idx = 0;
        for (const json& e : j) {
            ++idx;
            std::string where = path + " record " + std::to_string(idx);
            if (!e.is_object()) raise(Errc::parse_error, where + ": expected an object");
            ManifestRecord r;
            try {
                r.id = e.at("id").get<std::string>();
                r.view = e.at("view").get<std::string>();
                r.task = e.at("task").get<std::string>();
                r.tool = e.at("tool").get<std::string>();
                r.split = e.at("split").get<std::string>();
                r.feature_path = e.value("feature_path", "");
                r.heatmap_path = e.value("heatmap_path", "");
                r.landmarks_path = e.value("landmarks_path", "");
            } catch (const json::exception& ex) {
                raise(Errc::parse_error, where + ": " + ex.what());
            }
            validate_record(r, where);
            records.push_back(std::move(r));
        }
        return records;
    }

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != kManifestHeader)
                raise(Errc::parse_error, path + " line 1: bad manifest header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        std::string where = path + " line " + std::to_string(lineno);
        if (f.size() != 8) raise(Errc::parse_error, where + ": expected 8 columns");
        ManifestRecord r{f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]};
        validate_record(r, where);
        records.push_back(std::move(r));
    }
    return records;
}

void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        json j = json::array();
        for (const ManifestRecord& r : records)
            j.push_back({{"id", r.id},
                         {"view", r.view},
                         {"task", r.task},
                         {"tool", r.tool},
                         {"split", r.split},
                         {"feature_path", r.feature_path},
                         {"heatmap_path", r.heatmap_path},
                         {"landmarks_path", r.landmarks_path}});
        atomic_write(path, j.dump(2) + "\n");
        return;
    }
    std::string out = kManifestHeader;
    out.push_back('\n');
    for (const ManifestRecord& r : records) {
        out += r.id + ',' + r.view + ',' + r.task + ',' + r.tool + ',' + r.split + ',' +
               r.feature_path + ',' + r.heatmap_path + ',' + r.landmarks_path;
        out.push_back('\n');
    }
    atomic_write(path, out);
}

GestureTable default_gesture_table() {
    GestureTable t;
    t.pairs = {
        {"Press", "drill", 1},      {"Press", "spraybottle", 1}, {"Press", "stapler", 2},
        {"Click", "flashlight", 3}, {"Click", "kettle", 3},      {"Click", "lightswitch", 4},
        {"Click", "mouse", 5},      {"Hold", "hammer", 6},       {"Hold", "screwdriver", 6},
        {"Hold", "knife", 6},       {"Hold", "spatula", 6},      {"Hold", "flashlight", 7},
        {"Hold", "drill", 7},       {"Hold", "kettle", 8},       {"Hold", "cup", 8},
        {"Hold", "bottle", 8},      {"Hold", "doorhandle", 9},   {"Hold", "scissors", 10},
        {"Clamp", "knife", 11},     {"Clamp", "plug", 11},       {"Grip", "scissors", 12},
        {"Grip", "pliers", 13},     {"Open", "valve", 14},       {"Open", "bottle", 14},
    };
    for (int id = 1; id <= 14; ++id) t.gestures.push_back(placeholder_gesture(id));
    return t;
}

GestureTable load_gesture_table(const std::string& path) {
    json j = parse_json(read_file(path), path);
    GestureTable t;
    try {
        for (const json& p : j.at("pairs")) {
            GesturePair gp;
            gp.task = p.at("task").get<std::string>();
            gp.tool = p.at("tool").get<std::string>();
            gp.gesture_id = p.at("gesture_id").get<int>();
            t.pairs.push_back(std::move(gp));
        }
        for (const json& g : j.at("gestures")) {
            GestureConfig gc;
            gc.id = g.at("id").get<int>();
            const json& flex = g.at("flexion");
            if (flex.size() != 5)
                raise(Errc::parse_error, path + ": flexion must have 5 entries");
            for (int k = 0; k < 5; ++k) gc.flexion[k] = flex.at(k).get<double>();
            gc.abduction = g.at("abduction").get<double>();
            t.gestures.push_back(gc);
        }
    } catch (const json::exception& ex) {
        raise(Errc::parse_error, path + ": " + ex.what());
    }
    for (const GesturePair& p : t.pairs) {
        if (!contains(task_vocabulary(), p.task))
            raise(Errc::vocabulary_error, path + ": unknown task '" + p.task + "'");
        if (!contains(tool_vocabulary(), p.tool))
            raise(Errc::vocabulary_error, path + ": unknown tool '" + p.tool + "'");
        if (p.gesture_id < 1 || p.gesture_id > 14)
            raise(Errc::vocabulary_error, path + ": gesture id outside [1,14]");
        bool found = false;
        for (const GestureConfig& g : t.gestures) found = found || g.id == p.gesture_id;
        if (!found)
            raise(Errc::data_inconsistency,
                  path + ": gesture id " + std::to_string(p.gesture_id) + " has no angle record");
    }
    return t;
}

void save_gesture_table(const GestureTable& table, const std::string& path) {
    json pairs = json::array();
    for (const GesturePair& p : table.pairs)
        pairs.push_back({{"task", p.task}, {"tool", p.tool}, {"gesture_id", p.gesture_id}});
    json gestures = json::array();
    for (const GestureConfig& g : table.gestures)
        gestures.push_back({{"id", g.id},
                            {"flexion", std::vector<double>(g.flexion.begin(), g.flexion.end())},
                            {"abduction", g.abduction}});
    json j = {{"pairs", pairs}, {"gestures", gestures}};
    atomic_write(path, j.dump(2) + "\n");
}

int lookup_gesture_id(const GestureTable& table, const std::string& task,
                      const std::string& tool) {
    for (const GesturePair& p : table.pairs)
        if (p.task == task && p.tool == tool) return p.gesture_id;
    raise(Errc::unknown_pair, "no gesture mapping for (" + task + ", " + tool + ")");
}

GestureConfig lookup_gesture(const GestureTable& table, const std::string& task,
                             const std::string& tool) {
    int id = lookup_gesture_id(table, task, tool);
    for (const GestureConfig& g : table.gestures)
        if (g.id == id) return g;
    raise(Errc::data_inconsistency,
          "gesture id " + std::to_string(id) + " has no angle record");
}

DenseMap rasterize_polygons(const PolygonAnnotation& ann) {
    if (ann.h <= 0 || ann.w <= 0) raise(Errc::invalid_config, "annotation dims must be positive");
    for (const auto& poly : ann.polygons) {
        if (poly.size() < 3)
            raise(Errc::degenerate_polygon, "polygon needs at least 3 vertices");
        for (const auto& v : poly)
            if (v[0] < 0.0 || v[0] > ann.w || v[1] < 0.0 || v[1] > ann.h)
                raise(Errc::degenerate_polygon, "polygon vertex outside image bounds");
    }
    DenseMap out(ann.h, ann.w);
    for (int y = 0; y < ann.h; ++y)
        for (int x = 0; x < ann.w; ++x) {
            double px = x + 0.5, py = y + 0.5; // sample at the pixel center
            bool inside = false;
            for (const auto& poly : ann.polygons) {
                int crossings = 0;
                std::size_t n = poly.size();
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& a = poly[i];
                    const auto& b = poly[(i + 1) % n];
                    if ((a[1] > py) == (b[1] > py)) continue;
                    double xint = a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if (px < xint) ++crossings;
                }
                if (crossings % 2 == 1) {
                    inside = true;
                    break;
                }
            }
            if (inside) out.at(y, x) = 1.0;
        }
    return out;
}

DenseMap polygons_to_heatmap(const std::vector<PolygonAnnotation>& anns, double sigma) {
    if (anns.empty()) raise(Errc::empty_input, "no annotations given");
    DenseMap acc(anns.front().h, anns.front().w);
    for (const PolygonAnnotation& ann : anns) {
        if (ann.h != acc.h || ann.w != acc.w)
            raise(Errc::dimension_mismatch, "annotators disagree on image dims");
        DenseMap bin = rasterize_polygons(ann);
        for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += bin.v[i];
    }
    for (double& x : acc.v) x /= static_cast<double>(anns.size());
    return min_max_normalize(gaussian_blur(acc, sigma));
}

DenseMap gaussian_blur(const DenseMap& m, double sigma) {
    if (!(sigma > 0.0)) raise(Errc::invalid_config, "blur sigma must be positive");
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += kernel[i + radius];
    }
    for (double& k : kernel) k /= total;

    DenseMap mid(m.h, m.w), out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * m.at(y, fold_index(x + i, m.w));
            mid.at(y, x) = acc;
        }
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * mid.at(fold_index(y + i, m.h), x);
            out.at(y, x) = acc;
        }
    return out;
}

Tensor load_tensor(const std::string& path) { return parse_tensor(read_file(path), path); }

void save_tensor(const Tensor& t, const std::string& path) {
    if (t.dims.empty() || t.dims.size() > kMaxRank)
        raise(Errc::dim_limit, path + ": rank outside [1,8]");
    if (t.count() != t.v.size()) raise(Errc::dimension_mismatch, path + ": dims/data mismatch");
    if (t.v.size() > kMaxElements) raise(Errc::dim_limit, path + ": tensor too large");
    std::string bytes = "GAFT";
    append_u32(bytes, 1);
    append_u32(bytes, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) append_u32(bytes, d);
    for (float f : t.v) append_u32(bytes, std::bit_cast<std::uint32_t>(f));
    atomic_write(path, bytes);
}

Tensor to_tensor(const FeatureMap& f) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(f.d), static_cast<std::uint32_t>(f.h),
              static_cast<std::uint32_t>(f.w)};
    t.v.assign(f.v.begin(), f.v.end());
    return t;
}

Tensor to_tensor(const DenseMap& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.h), static_cast<std::uint32_t>(m.w)};
    t.v.assign(m.v.begin(), m.v.end());
    return t;
}

FeatureMap to_feature_map(const Tensor& t, Provenance tag) {
    if (t.dims.size() != 3) raise(Errc::dimension_mismatch, "feature tensor must be rank 3");
    FeatureMap f(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                 static_cast<int>(t.dims[2]), tag);
    f.v.assign(t.v.begin(), t.v.end());
    return f;
}

DenseMap to_dense_map(const Tensor& t) {
    if (t.dims.size() != 2) raise(Errc::dimension_mismatch, "map tensor must be rank 2");
    DenseMap m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    m.v.assign(t.v.begin(), t.v.end());
    return m;
}

FeatureMap load_feature_map(const std::string& path, Provenance tag) {
    return to_feature_map(load_tensor(path), tag);
}

void save_dense_map(const DenseMap& m, const std::string& path) {
    save_tensor(to_tensor(m), path);
}

DenseMap load_pgm(const std::string& path) { return parse_pgm(read_file(path), path); }

void save_pgm(const DenseMap& m, const std::string& path) {
    std::string bytes = "P5\n" + std::to_string(m.w) + " " + std::to_string(m.h) + "\n255\n";
    for (double v : m.v) {
        double c = std::clamp(v, 0.0, 1.0);
        bytes.push_back(static_cast<char>(static_cast<int>(std::lround(c * 255.0))));
    }
    atomic_write(path, bytes);
}

void save_ppm(const std::vector<std::uint8_t>& rgb, int h, int w, const std::string& path) {
    if (rgb.size() != static_cast<std::size_t>(h) * w * 3)
        raise(Errc::dimension_mismatch, path + ": rgb buffer does not match dims");
    std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    bytes.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    atomic_write(path, bytes);
}

DenseMap load_heatmap(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() >= 4 && bytes.compare(0, 4, "GAFT") == 0)
        return to_dense_map(parse_tensor(bytes, path));
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return parse_pgm(bytes, path);
    raise(Errc::parse_error, path + ": neither GAFT nor binary PGM");
}

void atomic_write(const std::string& path, const std::string& bytes) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(Errc::io_error, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) raise(Errc::io_error, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) raise(Errc::io_error, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void save_param_tensors(const std::string& dir, const std::string& prefix,
                        std::vector<ParamRef> refs, json& tensors) {
    for (const ParamRef& r : refs) {
        std::string file = prefix + "." + r.name + ".gaft";
        Tensor t;
        t.dims = {static_cast<std::uint32_t>(r.size)};
        t.v.assign(r.data, r.data + r.size);
        save_tensor(t, (fs::path(dir) / file).string());
        tensors.push_back({{"name", prefix + "." + r.name},
                           {"file", file},
                           {"size", r.size},
                           {"trainable", r.trainable}});
    }
}

void fill_params(const std::string& dir, const std::string& prefix, std::vector<ParamRef> refs,
                 const json& tensors) {
    for (const ParamRef& r : refs) {
        std::string want = prefix + "." + r.name;
        const json* entry = nullptr;
        for (const json& t : tensors)
            if (t.at("name").get<std::string>() == want) entry = &t;
        if (!entry) raise(Errc::data_inconsistency, "checkpoint lacks tensor " + want);
        Tensor t = load_tensor((fs::path(dir) / entry->at("file").get<std::string>()).string());
        if (t.v.size() != r.size)
            raise(Errc::data_inconsistency, "checkpoint tensor " + want + " has wrong size");
        for (std::size_t i = 0; i < r.size; ++i) r.data[i] = t.v[i];
    }
}

} // namespace

void save_checkpoint(const std::string& dir, LocalizationHead& head, GestureClassifier* clf) {
    fs::create_directories(dir);
    json tensors = json::array();
    save_param_tensors(dir, "head", head_params(head), tensors);
    json manifest = {
        {"format", "graspkit-checkpoint-v1"},
        {"head",
         {{"d", head.d},
          {"classes", head.classes},
          {"norms_calibrated", head.norm1.calibrated && head.norm2.calibrated}}},
        {"tensors", tensors},
    };
    if (clf) {
        json ctensors = json::array();
        save_param_tensors(dir, "clf", classifier_params(*clf), ctensors);
        for (const json& t : ctensors) manifest["tensors"].push_back(t);
        manifest["classifier"] = {{"d", clf->d}};
    }
    atomic_write((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::string mpath = (fs::path(dir) / "manifest.json").string();
    json manifest = parse_json(read_file(mpath), mpath);
    Checkpoint ck;
    try {
        int d = manifest.at("head").at("d").get<int>();
        int classes = manifest.at("head").at("classes").get<int>();
        ck.head = make_head(d, classes, 0);
        const json& tensors = manifest.at("tensors");
        fill_params(dir, "head", head_params(ck.head), tensors);
        bool calibrated = manifest.at("head").value("norms_calibrated", false);
        ck.head.norm1.calibrated = calibrated;
        ck.head.norm2.calibrated = calibrated;
        if (manifest.contains("classifier")) {
            ck.clf = make_classifier(manifest.at("classifier").at("d").get<int>(), 0);
            fill_params(dir, "clf", classifier_params(ck.clf), tensors);
            ck.has_classifier = true;
        }
    } catch (const json::exception& ex) {
        raise(Errc::parse_error, mpath + ": " + ex.what());
    }
    return ck;
}

} // namespace graspkit
