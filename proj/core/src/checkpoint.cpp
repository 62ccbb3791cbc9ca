#include "flowcast/checkpoint.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flowcast/errors.hpp"

namespace flowcast {

namespace {

constexpr std::array<char, 8> kMagic{'F', 'L', 'O', 'W', 'C', 'A', 'S', 'T'};

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_integral_v<T>);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw DataError("checkpoint: truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

std::string fmt(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double parse_num(const std::string& s, const std::string& key) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError("checkpoint: bad numeric value for '" + key + "'");
    }
    return v;
}

std::size_t parse_size(const std::string& s, const std::string& key) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError("checkpoint: bad integer value for '" + key + "'");
    }
    return v;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += f(v[i]);
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string perm_text(const Permutation& p) {
    return join(p.order(), [](std::size_t i) { return std::to_string(i); });
}

class HeaderReader {
public:
    explicit HeaderReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    const std::string& str(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw DataError("checkpoint: header lacks '" + key + "'");
        return it->second;
    }
    double num(const std::string& key) const { return parse_num(str(key), key); }
    std::size_t size(const std::string& key) const { return parse_size(str(key), key); }
    bool flag(const std::string& key) const { return size(key) != 0; }
    std::vector<std::size_t> sizes(const std::string& key) const {
        std::vector<std::size_t> out;
        for (const auto& p : split(str(key), ',')) out.push_back(parse_size(p, key));
        return out;
    }
    std::vector<double> nums(const std::string& key) const {
        std::vector<double> out;
        for (const auto& p : split(str(key), ',')) out.push_back(parse_num(p, key));
        return out;
    }
    const std::map<std::string, std::string>& all() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace

void save_checkpoint(std::ostream& os, const ConditionalFlow& flow, const FlowConfig& config,
                     const std::map<std::string, std::string>& meta) {
    auto num = [](double v) { return fmt(v); };
    auto idx = [](std::size_t v) { return std::to_string(v); };
    std::map<std::string, std::string> kv;
    kv["model"] = to_string(config.model);
    kv["dim"] = std::to_string(config.dim);
    kv["context_dim"] = std::to_string(config.context_dim);
    kv["transforms"] = std::to_string(config.transforms);
    kv["base_hidden"] = join(config.base_hidden, idx);
    kv["conditioner_hidden"] = join(config.conditioner_hidden, idx);
    kv["bins"] = std::to_string(config.bins);
    kv["bound"] = fmt(config.bound);
    kv["learned_base"] = config.learned_base ? "1" : "0";
    kv["permute"] = config.permute ? "1" : "0";
    kv["zero_init_conditioners"] = config.zero_init_conditioners ? "1" : "0";
    kv["unit_interval_targets"] = config.unit_interval_targets ? "1" : "0";
    kv["unit_margin"] = fmt(config.unit_margin);
    kv["logit_epsilon"] = fmt(flow.logit_epsilon());
    kv["seed"] = std::to_string(config.seed);
    kv["kinds"] = join(flow.transforms(), [](const Transform& t) { return to_string(t.kind); });
    kv["permutations"] = join(flow.transforms(), [](const Transform& t) { return perm_text(t.permutation); }, ';');
    kv["target_scale"] = fmt(flow.target_map().scale);
    kv["target_offset"] = fmt(flow.target_map().offset);
    kv["scaler_mean"] = join(flow.feature_scaler().mean, num);
    kv["scaler_scale"] = join(flow.feature_scaler().scale, num);
    for (const auto& [k, v] : meta) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw ConfigError("checkpoint: metadata key/value may not contain '=' or newlines: " + k);
        }
        kv["meta." + k] = v;
    }
    std::string header;
    for (const auto& [k, v] : kv) header += k + "=" + v + "\n";

    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(os, kCheckpointVersion);
    put_le<std::uint64_t>(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));

    const auto params = flow.named_parameters();
    put_le<std::uint64_t>(os, params.size());
    for (const auto& [name, tensor] : params) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) put_le<std::uint64_t>(os, d);
        for (double v : tensor.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const ConditionalFlow& flow, const FlowConfig& config,
                     const std::map<std::string, std::string>& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    save_checkpoint(out, flow, config, meta);
}

Checkpoint load_checkpoint(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("checkpoint: bad magic");
    const auto version = get_le<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto header_len = get_le<std::uint64_t>(is);
    if (header_len > (1u << 26)) throw DataError("checkpoint: implausible header length");
    std::string header(header_len, '\0');
    if (!is.read(header.data(), static_cast<std::streamsize>(header_len))) throw DataError("checkpoint: truncated");

    std::map<std::string, std::string> kv;
    std::istringstream hs(header);
    for (std::string line; std::getline(hs, line);) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw DataError("checkpoint: malformed header line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const HeaderReader h(std::move(kv));

    Checkpoint ck;
    FlowConfig& cfg = ck.config;
    try {
        cfg.model = model_kind_from_string(h.str("model"));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    cfg.dim = h.size("dim");
    cfg.context_dim = h.size("context_dim");
    cfg.transforms = h.size("transforms");
    cfg.base_hidden = h.sizes("base_hidden");
    cfg.conditioner_hidden = h.sizes("conditioner_hidden");
    cfg.bins = h.size("bins");
    cfg.bound = h.num("bound");
    cfg.learned_base = h.flag("learned_base");
    cfg.permute = h.flag("permute");
    cfg.zero_init_conditioners = h.flag("zero_init_conditioners");
    cfg.unit_interval_targets = h.flag("unit_interval_targets");
    cfg.unit_margin = h.num("unit_margin");
    cfg.logit_epsilon = h.num("logit_epsilon");
    cfg.seed = h.size("seed");
    for (const auto& [k, v] : h.all())
        if (k.rfind("meta.", 0) == 0) ck.meta[k.substr(5)] = v;

    try {
        ck.flow = make_flow(cfg);
    } catch (const Error& e) {
        throw DataError(std::string("checkpoint: inconsistent architecture: ") + e.what());
    }
    const auto kinds = split(h.str("kinds"), ',');
    const auto perms = split(h.str("permutations"), ';');
    const auto& transforms = ck.flow.transforms();
    if (kinds.size() != transforms.size() || perms.size() != transforms.size()) {
        throw DataError("checkpoint: transform list does not match the architecture");
    }
    for (std::size_t k = 0; k < transforms.size(); ++k) {
        if (kinds[k] != to_string(transforms[k].kind) || perms[k] != perm_text(transforms[k].permutation)) {
            throw DataError("checkpoint: transform " + std::to_string(k) + " does not match the architecture");
        }
    }
    ck.flow.set_target_map({h.num("target_scale"), h.num("target_offset")});
    FeatureScaler scaler{h.nums("scaler_mean"), h.nums("scaler_scale")};
    if (!scaler.empty()) ck.flow.set_feature_scaler(std::move(scaler));
    ck.flow.set_logit_epsilon(cfg.logit_epsilon);

    auto params = ck.flow.named_parameters();
    const auto count = get_le<std::uint64_t>(is);
    if (count != params.size()) {
        throw DataError("checkpoint: holds " + std::to_string(count) + " tensors, architecture needs " +
                        std::to_string(params.size()));
    }
    for (auto& [name, tensor] : params) {
        const auto name_len = get_le<std::uint32_t>(is);
        if (name_len > 4096) throw DataError("checkpoint: implausible tensor name length");
        std::string stored(name_len, '\0');
        if (!is.read(stored.data(), name_len)) throw DataError("checkpoint: truncated");
        if (stored != name) throw DataError("checkpoint: expected tensor '" + name + "', found '" + stored + "'");
        const auto rank = get_le<std::uint32_t>(is);
        ad::Shape shape(rank);
        for (auto& d : shape) d = get_le<std::uint64_t>(is);
        if (shape != tensor.shape()) {
            throw DataError("checkpoint: tensor '" + name + "' has shape " + ad::shape_str(shape) + ", expected " +
                            ad::shape_str(tensor.shape()));
        }
        for (double& v : tensor.mutable_data()) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
    }
    return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace flowcast
