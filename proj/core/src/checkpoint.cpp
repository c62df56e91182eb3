#include "ddar/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <map>
#include <stdexcept>

#include "ddar/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace ddar {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'A', 'R'};

void put_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

void put_matrix(std::string& out, const Matrix& m) {
    out.append(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double));
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class Reader {
public:
    Reader(std::string bytes, std::string path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    std::string str(const char* what) {
        const std::uint32_t len = u32(what);
        need(len, what);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    Matrix matrix(std::size_t rows, std::size_t cols, const char* what) {
        const std::size_t n = rows * cols * sizeof(double);
        need(n, what);
        std::vector<double> data(rows * cols);
        std::memcpy(data.data(), bytes_.data() + pos_, n);
        pos_ += n;
        return Matrix(rows, cols, std::move(data));
    }

    void check_magic() {
        need(4, "magic");
        if (std::memcmp(bytes_.data(), kMagic, 4) != 0)
            throw std::runtime_error("checkpoint " + path_ + ": bad magic bytes");
        pos_ = 4;
    }

    void check_exhausted() {
        if (pos_ != bytes_.size())
            throw std::runtime_error("checkpoint " + path_ + ": trailing bytes");
    }

private:
    void need(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size())
            throw std::runtime_error("checkpoint " + path_ + ": truncated while reading " +
                                     what);
    }

    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

using Header = std::map<std::string, std::string>;

std::string header_get(const Header& h, const std::string& key, const std::string& path) {
    auto it = h.find(key);
    if (it == h.end())
        throw std::runtime_error("checkpoint " + path + ": missing header field '" + key + "'");
    return it->second;
}

std::size_t header_count(const Header& h, const std::string& key, const std::string& path) {
    return static_cast<std::size_t>(std::stoull(header_get(h, key, path)));
}

double header_double(const Header& h, const std::string& key, const std::string& path) {
    return std::stod(header_get(h, key, path));
}

std::string serialize_header(const Header& h) {
    std::string out(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(h.size()));
    for (const auto& [k, v] : h) {
        put_str(out, k);
        put_str(out, v);
    }
    return out;
}

Header parse_header(Reader& r, const std::string& path) {
    r.check_magic();
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint " + path + ": format version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
    Header h;
    const std::uint32_t n = r.u32("header size");
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string k = r.str("header key");
        h[k] = r.str("header value");
    }
    return h;
}

Header extractor_header(const ExtractorConfig& c) {
    return {
        {"input_dim", std::to_string(c.input_dim)},
        {"width", std::to_string(c.width)},
        {"depth", std::to_string(c.depth)},
        {"embed_dim", std::to_string(c.embed_dim)},
        {"dropout_rate", fmt_double(c.dropout_rate)},
    };
}

ExtractorConfig extractor_from_header(const Header& h, const std::string& path) {
    ExtractorConfig c;
    c.input_dim = header_count(h, "input_dim", path);
    c.width = header_count(h, "width", path);
    c.depth = header_count(h, "depth", path);
    c.embed_dim = header_count(h, "embed_dim", path);
    c.dropout_rate = header_double(h, "dropout_rate", path);
    return c;
}

void put_extractor(std::string& out, const ExtractorWeights& w) {
    put_matrix(out, w.w_in);
    put_matrix(out, w.b_in);
    for (std::size_t i = 0; i < w.w_block.size(); ++i) {
        put_matrix(out, w.w_block[i]);
        put_matrix(out, w.b_block[i]);
    }
    put_matrix(out, w.w_out);
    put_matrix(out, w.b_out);
}

ExtractorWeights read_extractor(Reader& r, const ExtractorConfig& c) {
    ExtractorWeights w;
    w.w_in = r.matrix(c.input_dim, c.width, "w_in");
    w.b_in = r.matrix(1, c.width, "b_in");
    for (std::size_t i = 0; i < c.depth; ++i) {
        w.w_block.push_back(r.matrix(c.width, c.width, "w_block"));
        w.b_block.push_back(r.matrix(1, c.width, "b_block"));
    }
    w.w_out = r.matrix(c.width, c.embed_dim, "w_out");
    w.b_out = r.matrix(1, c.embed_dim, "b_out");
    return w;
}

}  // namespace

void save_checkpoint(const DdarModel& model, const std::string& path) {
    Header h = extractor_header(model.config);
    h["method"] = "ddar";
    h["num_classes"] = std::to_string(model.num_classes);
    h["num_prototypes"] = std::to_string(model.num_prototypes());
    h["centroid_dim"] = std::to_string(model.centroid_dim);
    h["sigma"] = fmt_double(model.sigma);
    h["lambda"] = fmt_double(model.lambda);
    std::string out = serialize_header(h);
    put_extractor(out, model.extractor);
    put_matrix(out, model.prototypes);
    for (const Matrix& w : model.rbf_weights) put_matrix(out, w);
    for (const Matrix& c : model.centroids) put_matrix(out, c);
    write_file_atomic(path, out);
}

void save_checkpoint(const SoftmaxModel& model, const std::string& path,
                     const std::string& method) {
    if (method != "softmax" && method != "dropout")
        throw std::invalid_argument("save_checkpoint: bad method tag '" + method + "'");
    Header h = extractor_header(model.config);
    h["method"] = method;
    h["num_classes"] = std::to_string(model.num_classes);
    std::string out = serialize_header(h);
    put_extractor(out, model.extractor);
    put_matrix(out, model.head_w);
    put_matrix(out, model.head_b);
    write_file_atomic(path, out);
}

std::string checkpoint_method(const std::string& path) {
    Reader r(read_file(path), path);
    return header_get(parse_header(r, path), "method", path);
}

DdarModel load_ddar_checkpoint(const std::string& path) {
    Reader r(read_file(path), path);
    Header h = parse_header(r, path);
    const std::string method = header_get(h, "method", path);
    if (method != "ddar")
        throw std::runtime_error("checkpoint " + path + ": method '" + method +
                                 "', expected 'ddar'");
    DdarModel m;
    m.config = extractor_from_header(h, path);
    m.num_classes = static_cast<int>(header_count(h, "num_classes", path));
    m.centroid_dim = header_count(h, "centroid_dim", path);
    m.sigma = header_double(h, "sigma", path);
    m.lambda = header_double(h, "lambda", path);
    const std::size_t num_prototypes = header_count(h, "num_prototypes", path);
    m.extractor = read_extractor(r, m.config);
    m.prototypes = r.matrix(num_prototypes, m.config.embed_dim, "prototypes");
    for (int c = 0; c < m.num_classes; ++c)
        m.rbf_weights.push_back(r.matrix(m.centroid_dim, num_prototypes, "rbf_weights"));
    for (int c = 0; c < m.num_classes; ++c)
        m.centroids.push_back(r.matrix(1, m.centroid_dim, "centroids"));
    r.check_exhausted();
    m.validate();
    return m;
}

SoftmaxModel load_softmax_checkpoint(const std::string& path) {
    Reader r(read_file(path), path);
    Header h = parse_header(r, path);
    const std::string method = header_get(h, "method", path);
    if (method != "softmax" && method != "dropout")
        throw std::runtime_error("checkpoint " + path + ": method '" + method +
                                 "', expected 'softmax' or 'dropout'");
    SoftmaxModel m;
    m.config = extractor_from_header(h, path);
    m.num_classes = static_cast<int>(header_count(h, "num_classes", path));
    m.extractor = read_extractor(r, m.config);
    m.head_w = r.matrix(m.config.embed_dim, static_cast<std::size_t>(m.num_classes), "head_w");
    m.head_b = r.matrix(1, static_cast<std::size_t>(m.num_classes), "head_b");
    r.check_exhausted();
    return m;
}

}  // namespace ddar
