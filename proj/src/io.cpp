#include "mpath/io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace mpath {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'S', 'N'};

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("snapshot file truncated");
    return v;
}

}  // namespace

void write_snapshots(const std::filesystem::path& path, const std::vector<TaggedSnapshot>& snaps) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    const auto ns = snaps.empty() ? 0u : static_cast<std::uint32_t>(snaps.front().snapshot.r.size());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, ns);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(snaps.size()));
    for (const auto& s : snaps) {
        if (static_cast<std::uint32_t>(s.snapshot.r.size()) != ns) throw std::invalid_argument("mixed snapshot lengths");
        put<std::int32_t>(os, s.n);
        put<std::int32_t>(os, s.anchor);
        put<double>(os, s.snapshot.sigma);
        for (Eigen::Index k = 0; k < s.snapshot.r.size(); ++k) {
            put<double>(os, s.snapshot.r[k].real());
            put<double>(os, s.snapshot.r[k].imag());
        }
    }
}

std::vector<TaggedSnapshot> read_snapshots(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a snapshot file");
    if (get<std::uint32_t>(is) != 1) throw std::runtime_error("unsupported snapshot file version");
    const auto ns = get<std::uint32_t>(is);
    const auto count = get<std::uint32_t>(is);
    std::vector<TaggedSnapshot> out(count);
    for (auto& s : out) {
        s.n = get<std::int32_t>(is);
        s.anchor = get<std::int32_t>(is);
        s.snapshot.sigma = get<double>(is);
        s.snapshot.r.resize(ns);
        for (std::uint32_t k = 0; k < ns; ++k) {
            const double re = get<double>(is);
            const double im = get<double>(is);
            s.snapshot.r[k] = {re, im};
        }
    }
    return out;
}

void write_measurements_csv(std::ostream& os, const std::vector<MeasurementSet>& z) {
    os << "n,anchor,distance_m,amplitude\n";
    os.precision(17);
    for (std::size_t n = 0; n < z.size(); ++n)
        for (std::size_t j = 0; j < z[n].size(); ++j)
            for (const auto& m : z[n][j]) os << n << ',' << j << ',' << m.distance << ',' << m.amplitude << '\n';
}

std::vector<MeasurementSet> read_measurements_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty measurement CSV");
    std::vector<MeasurementSet> z;
    std::size_t num_anchors = 0;
    struct Row {
        std::size_t n, j;
        Measurement m;
    };
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[4];
        for (auto& x : f)
            if (!std::getline(ss, x, ',')) throw std::runtime_error("malformed measurement row: " + line);
        Row r{std::stoul(f[0]), std::stoul(f[1]), {std::stod(f[2]), std::stod(f[3])}};
        num_anchors = std::max(num_anchors, r.j + 1);
        if (r.n >= z.size()) z.resize(r.n + 1);
        rows.push_back(r);
    }
    for (auto& s : z) s.resize(num_anchors);
    for (const auto& r : rows) z[r.n][r.j].push_back(r.m);
    return z;
}

void write_estimates_jsonl(std::ostream& os, const std::vector<StepEstimate>& steps) {
    for (const auto& e : steps) {
        nlohmann::json j;
        j["n"] = e.n;
        j["p_hat"] = {e.position.x(), e.position.y()};
        j["v_hat"] = {e.velocity.x(), e.velocity.y()};
        j["gamma_r_hat"] = e.rise;
        j["anchors"] = nlohmann::json::array();
        for (const auto& a : e.anchors)
            j["anchors"].push_back({{"u", a.amplitude}, {"omega", a.dnr}, {"b", a.bias}, {"gamma_f", a.fall}, {"q", a.q}});
        j["ess"] = e.ess;
        os << j.dump() << '\n';
    }
}

void write_rmse_csv(std::ostream& os, const std::vector<VariantResult>& variants) {
    os << "variant,n,rmse_m\n";
    for (const auto& v : variants)
        for (std::size_t n = 0; n < v.rmse.size(); ++n) os << v.flags.name << ',' << n << ',' << v.rmse[n] << '\n';
}

void write_cdf_csv(std::ostream& os, const std::vector<VariantResult>& variants) {
    os << "variant,rmse_m,cdf\n";
    for (const auto& v : variants) {
        const auto c = rmse_cdf(v.runs);
        for (std::size_t k = 0; k < c.size(); ++k)
            os << v.flags.name << ',' << c[k] << ',' << static_cast<double>(k + 1) / static_cast<double>(c.size()) << '\n';
    }
}

}  // namespace mpath
