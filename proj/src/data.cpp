#include "aesthnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace aesthnet {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) + ": bad numeric field '" +
                              s + "'");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for reading");
    return f;
}

// Deterministic shortest-round-trip formatting for CSV output.
std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char cand[32];
        std::snprintf(cand, sizeof cand, "%.*g", prec, v);
        if (std::strtod(cand, nullptr) == v) return cand;
    }
    return buf;
}

void check_unique_ids(const std::vector<std::string>& ids, const std::string& path) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second)
            throw ValidationError(path + ": duplicate id '" + id + "'");
}

template <typename T>
void put_le(std::ofstream& f, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& f, const std::string& path) {
    unsigned char buf[sizeof(T)];
    if (!f.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw ValidationError(path + ": truncated file");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

const std::vector<std::size_t>& default_mlsp_channels() {
    static const std::vector<std::size_t> ch{112, 160, 272, 272, 448};
    return ch;
}

EmbeddingVector mlsp_pool(const ActivationSet& a) {
    if (a.maps.empty()) throw ValidationError("mlsp_pool: empty activation set");
    EmbeddingVector out;
    out.id = a.image_id;
    for (std::size_t mi = 0; mi < a.maps.size(); ++mi) {
        const auto& m = a.maps[mi];
        if (m.h == 0 || m.w == 0 || m.c == 0)
            throw ValidationError("mlsp_pool: map " + std::to_string(mi) +
                                  " has zero spatial or channel extent");
        if (m.data.size() != m.h * m.w * m.c)
            throw DimensionError("mlsp_pool: map " + std::to_string(mi) + " data length " +
                                 std::to_string(m.data.size()) + " != " +
                                 std::to_string(m.h * m.w * m.c));
        const double inv = 1.0 / static_cast<double>(m.h * m.w);
        std::vector<double> pooled(m.c, 0.0);
        for (std::size_t px = 0; px < m.h * m.w; ++px)
            for (std::size_t ch = 0; ch < m.c; ++ch) pooled[ch] += m.data[px * m.c + ch];
        for (std::size_t ch = 0; ch < m.c; ++ch) out.values.push_back(pooled[ch] * inv);
    }
    return out;
}

std::vector<double> default_bucket_values(std::size_t B) {
    std::vector<double> s(B);
    for (std::size_t i = 0; i < B; ++i) s[i] = static_cast<double>(i + 1);
    return s;
}

// --- embeddings CSV ---------------------------------------------------------

std::vector<EmbeddingVector> load_embeddings_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    std::vector<EmbeddingVector> out;
    if (!std::getline(f, line)) return out;  // empty file -> empty list
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "id")
        throw ValidationError(path + ":1: malformed header, expected 'id,v0,...'");
    const std::size_t dim = header.size() - 1;
    std::size_t line_no = 1;
    std::vector<std::string> ids;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ValidationError(path + ":" + std::to_string(line_no) + ": row has " +
                                  std::to_string(fields.size() - 1) + " values, header names " +
                                  std::to_string(dim));
        EmbeddingVector e;
        e.id = fields[0];
        e.values.reserve(dim);
        for (std::size_t i = 1; i < fields.size(); ++i)
            e.values.push_back(parse_double(fields[i], path, line_no));
        ids.push_back(e.id);
        out.push_back(std::move(e));
    }
    check_unique_ids(ids, path);
    return out;
}

void store_embeddings_csv(const std::vector<EmbeddingVector>& embs, const std::string& path) {
    auto f = open_out(path);
    const std::size_t dim = embs.empty() ? 0 : embs[0].values.size();
    f << "id";
    for (std::size_t i = 0; i < dim; ++i) f << ",v" << i;
    f << "\n";
    for (const auto& e : embs) {
        if (e.values.size() != dim)
            throw DimensionError("store_embeddings_csv: dim mismatch for id '" + e.id + "'");
        f << e.id;
        for (double v : e.values) f << "," << fmt_double(v);
        f << "\n";
    }
}

// --- embeddings binary ------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'M', 'L', 'S', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void store_embeddings_bin(const std::vector<EmbeddingVector>& embs, const std::string& path) {
    auto f = open_out(path);
    f.write(kMagic, 4);
    put_le<std::uint32_t>(f, kVersion);
    put_le<std::uint64_t>(f, embs.size());
    const std::uint32_t dim = embs.empty() ? 0 : static_cast<std::uint32_t>(embs[0].values.size());
    put_le<std::uint32_t>(f, dim);
    for (const auto& e : embs) {
        if (e.values.size() != dim)
            throw DimensionError("store_embeddings_bin: dim mismatch for id '" + e.id + "'");
        if (e.id.size() > 0xffff)
            throw ValidationError("store_embeddings_bin: id too long: '" + e.id + "'");
        put_le<std::uint16_t>(f, static_cast<std::uint16_t>(e.id.size()));
        f.write(e.id.data(), static_cast<std::streamsize>(e.id.size()));
        for (double v : e.values) {
            float fv = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &fv, 4);
            put_le<std::uint32_t>(f, bits);
        }
    }
}

std::vector<EmbeddingVector> load_embeddings_bin(const std::string& path) {
    auto f = open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError(path + ": bad magic, not an MLSP embedding file");
    const auto version = get_le<std::uint32_t>(f, path);
    if (version != kVersion)
        throw ValidationError(path + ": unsupported version " + std::to_string(version));
    const auto count = get_le<std::uint64_t>(f, path);
    const auto dim = get_le<std::uint32_t>(f, path);
    std::vector<EmbeddingVector> out;
    out.reserve(count);
    std::vector<std::string> ids;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id_len = get_le<std::uint16_t>(f, path);
        std::string id(id_len, '\0');
        if (!f.read(id.data(), id_len)) throw ValidationError(path + ": truncated id");
        EmbeddingVector e;
        e.id = std::move(id);
        e.values.reserve(dim);
        for (std::uint32_t j = 0; j < dim; ++j) {
            const auto bits = get_le<std::uint32_t>(f, path);
            float fv;
            std::memcpy(&fv, &bits, 4);
            e.values.push_back(static_cast<double>(fv));
        }
        ids.push_back(e.id);
        out.push_back(std::move(e));
    }
    check_unique_ids(ids, path);
    return out;
}

// --- attributes CSV ---------------------------------------------------------

std::vector<AttributeLabels> load_attributes_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    std::vector<AttributeLabels> out;
    if (!std::getline(f, line)) return out;
    auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "id" || header[1] != "style" ||
        header[2] != "comp_bits")
        throw ValidationError(path + ":1: malformed header, expected 'id,style,comp_bits'");
    std::size_t line_no = 1;
    std::size_t k_comp = 0;
    std::vector<std::string> ids;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 3 fields");
        AttributeLabels a;
        a.id = fields[0];
        if (!fields[1].empty())
            a.style = static_cast<std::size_t>(parse_double(fields[1], path, line_no));
        if (!fields[2].empty()) {
            std::vector<std::uint8_t> bits;
            for (char c : fields[2]) {
                if (c != '0' && c != '1')
                    throw ValidationError(path + ":" + std::to_string(line_no) +
                                          ": comp_bits must be '0'/'1' characters");
                bits.push_back(c == '1' ? 1 : 0);
            }
            if (k_comp == 0) k_comp = bits.size();
            if (bits.size() != k_comp)
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": comp_bits length varies across rows");
            a.composition = std::move(bits);
        }
        if (!a.style && !a.composition)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": row carries neither style nor composition label");
        ids.push_back(a.id);
        out.push_back(std::move(a));
    }
    check_unique_ids(ids, path);
    return out;
}

void store_attributes_csv(const std::vector<AttributeLabels>& labels, std::size_t k_comp,
                          const std::string& path) {
    auto f = open_out(path);
    f << "id,style,comp_bits\n";
    for (const auto& a : labels) {
        f << a.id << ",";
        if (a.style) f << *a.style;
        f << ",";
        if (a.composition) {
            if (a.composition->size() != k_comp)
                throw DimensionError("store_attributes_csv: comp length mismatch for '" + a.id +
                                     "'");
            for (auto b : *a.composition) f << (b ? '1' : '0');
        }
        f << "\n";
    }
}

// --- scores CSV -------------------------------------------------------------

std::vector<ScoreDistribution> load_scores_csv(const std::string& path,
                                               std::vector<double> bucket_values) {
    auto f = open_in(path);
    std::string line;
    std::vector<ScoreDistribution> out;
    if (!std::getline(f, line)) return out;
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "id")
        throw ValidationError(path + ":1: malformed header, expected 'id,c1,...'");
    const std::size_t B = header.size() - 1;
    if (bucket_values.empty()) bucket_values = default_bucket_values(B);
    if (bucket_values.size() != B)
        throw DimensionError(path + ": " + std::to_string(bucket_values.size()) +
                             " bucket values for " + std::to_string(B) + " count columns");
    for (std::size_t i = 1; i < B; ++i)
        if (!(bucket_values[i - 1] < bucket_values[i]))
            throw ValidationError(path + ": bucket values must be strictly increasing");
    std::size_t line_no = 1;
    std::vector<std::string> ids;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ValidationError(path + ":" + std::to_string(line_no) + ": row has " +
                                  std::to_string(fields.size() - 1) + " counts, header names " +
                                  std::to_string(B));
        ScoreDistribution d;
        d.id = fields[0];
        d.bucket_values = bucket_values;
        double total = 0.0;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            double c = parse_double(fields[i], path, line_no);
            if (c < 0.0)
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": negative vote count");
            d.probs.push_back(c);
            total += c;
        }
        if (total <= 0.0)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": degenerate all-zero count row");
        for (auto& p : d.probs) p /= total;
        ids.push_back(d.id);
        out.push_back(std::move(d));
    }
    check_unique_ids(ids, path);
    return out;
}

void store_scores_csv(const std::vector<ScoreDistribution>& dists, const std::string& path) {
    auto f = open_out(path);
    const std::size_t B = dists.empty() ? 0 : dists[0].buckets();
    f << "id";
    for (std::size_t i = 1; i <= B; ++i) f << ",c" << i;
    f << "\n";
    for (const auto& d : dists) {
        if (d.buckets() != B)
            throw DimensionError("store_scores_csv: bucket count mismatch for '" + d.id + "'");
        f << d.id;
        for (double p : d.probs) f << "," << fmt_double(p);
        f << "\n";
    }
}

// --- splits -----------------------------------------------------------------

namespace {

SplitSpec split_one(const std::vector<std::string>& ids, std::size_t n_train, std::size_t n_val,
                    std::size_t n_test, std::uint64_t seed, std::size_t repeat) {
    std::vector<std::string> shuffled = ids;
    Rng rng = Rng(seed).fork("splits").fork(repeat);
    rng.shuffle(shuffled);
    SplitSpec s;
    s.seed = seed;
    s.repeat_index = repeat;
    auto it = shuffled.begin();
    s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
    it += static_cast<std::ptrdiff_t>(n_train);
    s.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    s.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
    return s;
}

}  // namespace

std::vector<SplitSpec> make_splits(const std::vector<std::string>& ids, SplitFractions fr,
                                   std::uint64_t seed, std::size_t repeats) {
    if (fr.train < 0 || fr.val < 0 || fr.test < 0 || fr.train + fr.val + fr.test > 1.0 + 1e-9)
        throw ValidationError("make_splits: fractions must be nonnegative and sum <= 1");
    const std::size_t n = ids.size();
    std::size_t n_val = static_cast<std::size_t>(std::lround(fr.val * static_cast<double>(n)));
    std::size_t n_test = static_cast<std::size_t>(std::lround(fr.test * static_cast<double>(n)));
    std::size_t n_train = static_cast<std::size_t>(std::lround(fr.train * static_cast<double>(n)));
    if (n_train + n_val + n_test > n) n_train = n - n_val - n_test;
    std::vector<SplitSpec> out;
    for (std::size_t r = 0; r < repeats; ++r)
        out.push_back(split_one(ids, n_train, n_val, n_test, seed, r));
    return out;
}

std::vector<SplitSpec> make_splits_counted(const std::vector<std::string>& ids,
                                           std::size_t val_count, std::size_t test_count,
                                           std::uint64_t seed, std::size_t repeats) {
    if (val_count + test_count > ids.size())
        throw ValidationError("make_splits_counted: insufficient ids (" +
                              std::to_string(ids.size()) + ") for val " +
                              std::to_string(val_count) + " + test " + std::to_string(test_count));
    const std::size_t n_train = ids.size() - val_count - test_count;
    std::vector<SplitSpec> out;
    for (std::size_t r = 0; r < repeats; ++r)
        out.push_back(split_one(ids, n_train, val_count, test_count, seed, r));
    return out;
}

// --- balanced batch stream --------------------------------------------------

BalancedBatchStream::BalancedBatchStream(std::size_t n_style, std::size_t n_comp,
                                         std::size_t batch_size, Rng rng)
    : n_style_(n_style), n_comp_(n_comp), batch_size_(batch_size),
      per_task_(std::max(n_style, n_comp)), rng_(rng) {
    if (n_style == 0 || n_comp == 0)
        throw ValidationError("balanced_batch_stream: both datasets must be nonempty");
    if (batch_size < 2) throw ValidationError("balanced_batch_stream: batch_size must be >= 2");
}

std::vector<std::vector<TaggedIndex>> BalancedBatchStream::next_epoch() {
    std::vector<TaggedIndex> epoch;
    epoch.reserve(2 * per_task_);
    auto fill_task = [&](Task task, std::size_t n) {
        if (n == per_task_) {
            // Larger (or equal) dataset: a permutation, every sample once.
            std::vector<std::size_t> perm(n);
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            rng_.shuffle(perm);
            for (auto idx : perm) epoch.push_back({task, idx});
        } else {
            // Smaller dataset: resampled with replacement to match.
            for (std::size_t i = 0; i < per_task_; ++i) epoch.push_back({task, rng_.below(n)});
        }
    };
    fill_task(Task::style, n_style_);
    fill_task(Task::composition, n_comp_);
    rng_.shuffle(epoch);
    std::vector<std::vector<TaggedIndex>> batches;
    for (std::size_t i = 0; i < epoch.size(); i += batch_size_) {
        std::size_t end = std::min(i + batch_size_, epoch.size());
        batches.emplace_back(epoch.begin() + static_cast<std::ptrdiff_t>(i),
                             epoch.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

// --- synthetic generator ----------------------------------------------------

std::size_t synthetic_code(std::size_t style, const std::vector<std::uint8_t>& comp) {
    std::size_t bits = 0;
    for (std::size_t j = 0; j < comp.size(); ++j)
        if (comp[j]) bits |= (std::size_t{1} << j);
    return style * (std::size_t{1} << comp.size()) + bits;
}

std::vector<double> discretized_gaussian(const std::vector<double>& bucket_values, double mean,
                                         double stddev) {
    std::vector<double> p(bucket_values.size());
    if (stddev <= 0.0) {
        // Degenerate limit: all mass on the nearest bucket.
        std::size_t best = 0;
        for (std::size_t i = 1; i < bucket_values.size(); ++i)
            if (std::abs(bucket_values[i] - mean) < std::abs(bucket_values[best] - mean)) best = i;
        p[best] = 1.0;
        return p;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double z = (bucket_values[i] - mean) / stddev;
        p[i] = std::exp(-0.5 * z * z);
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
}

SyntheticData gen_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n > 0 && (cfg.D < 2 || cfg.K_v < 2 || cfg.K_c < 2 || cfg.B < 2))
        throw ValidationError("gen_synthetic: all dims must be >= 2");
    SyntheticData out;
    const std::size_t n_codes = cfg.K_v * (std::size_t{1} << cfg.K_c);
    const auto buckets = default_bucket_values(cfg.B);
    const double lo = buckets.front() + 0.5;
    const double hi = buckets.back() - 0.5;
    out.info.mean_lo = lo;
    out.info.mean_hi = hi;
    out.info.gap = (n_codes > 1) ? (hi - lo) / static_cast<double>(n_codes - 1) : 0.0;
    Rng base(cfg.seed);
    // Styles draw their score-level block in a seeded random order, so high
    // scores are not tied to any fixed direction in embedding space.
    std::vector<std::size_t> style_level(cfg.K_v);
    for (std::size_t k = 0; k < cfg.K_v; ++k) style_level[k] = k;
    {
        Rng level_rng = base.fork("levels");
        level_rng.shuffle(style_level);
    }
    const std::size_t span = std::size_t{1} << cfg.K_c;
    out.info.planted_means.resize(n_codes);
    for (std::size_t c = 0; c < n_codes; ++c) {
        const std::size_t level = style_level[c / span] * span + (c % span);
        out.info.planted_means[c] =
            (n_codes > 1) ? lo + out.info.gap * static_cast<double>(level) : 0.5 * (lo + hi);
    }
    if (cfg.n == 0) return out;

    Rng dir_rng = base.fork("directions");
    std::vector<std::vector<double>> style_centers(cfg.K_v, std::vector<double>(cfg.D));
    for (auto& c : style_centers)
        for (auto& v : c) v = dir_rng.normal(0.0, cfg.style_scale / std::sqrt((double)cfg.D));
    std::vector<std::vector<double>> comp_dirs(cfg.K_c, std::vector<double>(cfg.D));
    for (auto& c : comp_dirs)
        for (auto& v : c) v = dir_rng.normal(0.0, cfg.comp_scale / std::sqrt((double)cfg.D));

    Rng sample_rng = base.fork("samples");
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::size_t style = sample_rng.below(cfg.K_v);
        std::vector<std::uint8_t> comp(cfg.K_c, 0);
        for (auto& b : comp) b = sample_rng.bernoulli(cfg.comp_bit_prob) ? 1 : 0;

        EmbeddingVector e;
        e.id = "synth" + std::to_string(i);
        e.values.resize(cfg.D);
        for (std::size_t d = 0; d < cfg.D; ++d) {
            double v = style_centers[style][d];
            for (std::size_t j = 0; j < cfg.K_c; ++j)
                if (comp[j]) v += comp_dirs[j][d];
            v += sample_rng.normal(0.0, cfg.noise_std / std::sqrt((double)cfg.D));
            e.values[d] = v;
        }

        AttributeLabels a;
        a.id = e.id;
        a.style = style;
        a.composition = comp;

        ScoreDistribution d;
        d.id = e.id;
        d.bucket_values = buckets;
        d.probs = discretized_gaussian(
            buckets, out.info.planted_means[synthetic_code(style, comp)], cfg.dist_std);

        out.embeddings.push_back(std::move(e));
        out.attributes.push_back(std::move(a));
        out.distributions.push_back(std::move(d));
    }
    return out;
}

}  // namespace aesthnet
