#ifndef WKAM_PHI_CACHE_HPP
#define WKAM_PHI_CACHE_HPP

#include <wkam/serialization.hpp>

#include <openssl/evp.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <thread>

namespace wkam {

namespace detail {

inline void append_double(std::string& s, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g|", v);
    s += buf;
}

inline void append_matrix(std::string& s, const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) append_double(s, m(i, j));
}

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256: digest failure");
    }
    EVP_MD_CTX_free(ctx);
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

/// Flat binary image of a MinimizerResult.  Exact double bits round-trip, and
/// loading is a couple of memcpys, so cache hits cost microseconds.
inline std::string encode_result(const MinimizerResult& r) {
    const Trajectory& traj = r.trajectory;
    const std::int64_t n = traj.masses.count();
    const std::int64_t d = traj.nodes[0].cols();
    const std::int64_t nodes = static_cast<std::int64_t>(traj.nodes.size());

    std::string out("WKC2", 4);
    auto put_i64 = [&out](std::int64_t v) {
        out.append(reinterpret_cast<const char*>(&v), sizeof v);
    };
    auto put_f64 = [&out](double v) {
        out.append(reinterpret_cast<const char*>(&v), sizeof v);
    };
    put_i64(n);
    put_i64(d);
    put_i64(nodes);
    for (Eigen::Index i = 0; i < n; ++i) put_f64(traj.masses[i]);
    for (double t : traj.times) put_f64(t);
    for (const MatrixXd& node : traj.nodes)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) put_f64(node(i, j));
    put_f64(r.phi);
    put_f64(r.newton_residual);
    put_f64(r.energy_residual);
    out.push_back(r.backend == PhiBackend::jacobi ? 0 : 1);
    out.push_back(r.converged ? 1 : 0);
    out.push_back(r.multiple_minima ? 1 : 0);
    for (Eigen::Index j = 0; j < d; ++j) put_f64(r.from_shift[j]);
    for (Eigen::Index j = 0; j < d; ++j) put_f64(r.to_shift[j]);
    return out;
}

inline MinimizerResult decode_result(const std::string& bytes) {
    size_t pos = 0;
    auto need = [&](size_t count) {
        if (pos + count > bytes.size()) throw std::runtime_error("cache entry truncated");
    };
    need(4);
    if (std::memcmp(bytes.data(), "WKC2", 4) != 0)
        throw std::runtime_error("cache entry has wrong magic");
    pos = 4;
    auto get_i64 = [&]() {
        need(sizeof(std::int64_t));
        std::int64_t v;
        std::memcpy(&v, bytes.data() + pos, sizeof v);
        pos += sizeof v;
        return v;
    };
    auto get_f64 = [&]() {
        need(sizeof(double));
        double v;
        std::memcpy(&v, bytes.data() + pos, sizeof v);
        pos += sizeof v;
        return v;
    };
    const std::int64_t n = get_i64();
    const std::int64_t d = get_i64();
    const std::int64_t node_count = get_i64();
    if (n < 1 || d < 2 || node_count < 1 || n > 1'000'000 || node_count > 100'000'000)
        throw std::runtime_error("cache entry has implausible shape");

    VectorXd mass_values(n);
    for (Eigen::Index i = 0; i < n; ++i) mass_values[i] = get_f64();
    std::vector<double> times(static_cast<size_t>(node_count));
    for (double& t : times) t = get_f64();
    std::vector<MatrixXd> nodes;
    nodes.reserve(static_cast<size_t>(node_count));
    for (std::int64_t k = 0; k < node_count; ++k) {
        MatrixXd node(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) node(i, j) = get_f64();
        nodes.push_back(std::move(node));
    }
    const double phi_value = get_f64();
    const double newton = get_f64();
    const double energy = get_f64();
    need(3);
    const PhiBackend backend =
        bytes[pos] == 0 ? PhiBackend::jacobi : PhiBackend::time_domain;
    const bool converged = bytes[pos + 1] != 0;
    const bool multiple_minima = bytes[pos + 2] != 0;
    pos += 3;
    Eigen::RowVectorXd from_shift(d), to_shift(d);
    for (Eigen::Index j = 0; j < d; ++j) from_shift[j] = get_f64();
    for (Eigen::Index j = 0; j < d; ++j) to_shift[j] = get_f64();
    if (pos != bytes.size()) throw std::runtime_error("cache entry has trailing bytes");

    return MinimizerResult{phi_value,
                           Trajectory(Masses(std::move(mass_values)), std::move(times),
                                      std::move(nodes)),
                           backend,
                           newton,
                           energy,
                           converged,
                           multiple_minima,
                           std::move(from_shift),
                           std::move(to_shift)};
}

}   // namespace detail

/// Content address of a phi evaluation: canonical bytes of endpoints, masses,
/// mesh, backend, and tolerances through SHA-256.
inline std::string phi_cache_key(const Configuration& x, const Configuration& y,
                                 const PhiOptions& opts) {
    std::string s = "phi|";
    s += std::to_string(x.bodies()) + "x" + std::to_string(x.dim()) + "|";
    detail::append_matrix(s, x.masses.values());
    detail::append_matrix(s, x.points);
    detail::append_matrix(s, y.points);
    s += std::to_string(opts.nodes);
    s += "|";
    s += backend_name(opts.backend);
    s += "|";
    detail::append_double(s, opts.grad_tol);
    s += std::to_string(opts.max_iters);
    s += "|";
    detail::append_double(s, opts.barrier_clearance);
    return detail::sha256_hex(s);
}

/// Read-through file cache of MinimizerResults keyed by content hash.  Entries
/// are flat binary files; writes go through a temp file and an atomic rename, so
/// concurrent readers never observe partial entries.  Corrupt entries are
/// recomputed and overwritten with a warning.
class PhiCache {
public:
    explicit PhiCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }

    MinimizerResult get_or_compute(const std::string& key,
                                   const std::function<MinimizerResult()>& compute) const {
        const std::filesystem::path entry = dir_ / (key + ".bin");
        if (std::ifstream in(entry, std::ios::binary); in) {
            try {
                return detail::decode_result(read_stream(in));
            } catch (const std::exception& e) {
                std::cerr << "phi cache: corrupt entry " << entry.string() << " ("
                          << e.what() << "), recomputing\n";
            }
        }
        MinimizerResult result = compute();
        try {
            store(entry, detail::encode_result(result));
        } catch (const std::exception& e) {
            std::cerr << "phi cache: cannot store " << entry.string() << " (" << e.what()
                      << ")\n";
        }
        return result;
    }

private:
    static std::string read_stream(std::ifstream& in) {
        in.seekg(0, std::ios::end);
        const std::streamoff size = in.tellg();
        if (size < 0) throw std::runtime_error("cannot size cache entry");
        in.seekg(0, std::ios::beg);
        std::string bytes(static_cast<size_t>(size), '\0');
        in.read(bytes.data(), size);
        if (!in) throw std::runtime_error("cannot read cache entry");
        return bytes;
    }

    void store(const std::filesystem::path& entry, const std::string& bytes) const {
        std::filesystem::create_directories(dir_);
        std::filesystem::path tmp = entry;
        tmp += ".tmp" + std::to_string(::getpid()) + "." +
               std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write cache entry");
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        }
        std::filesystem::rename(tmp, entry);
    }

    std::filesystem::path dir_;
};

/// phi() with a cache in front; plugs into WeakKamSpec::phi_eval.
inline std::function<MinimizerResult(const Configuration&, const Configuration&,
                                     const PhiOptions&)>
cached_phi(std::shared_ptr<PhiCache> cache) {
    return [cache](const Configuration& x, const Configuration& y, const PhiOptions& opts) {
        return cache->get_or_compute(phi_cache_key(x, y, opts),
                                     [&] { return phi(x, y, opts); });
    };
}

}   // namespace wkam

#endif
