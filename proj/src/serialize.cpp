#include "mrfno/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mrfno {

namespace {

constexpr std::uint32_t kMagic = 0x4d52464eu; // "MRFN"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("truncated binary function file");
    return v;
}

} // namespace

void save_function(const DiscretizedFunction& f, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    put(os, kMagic);
    put(os, kVersion);
    put(os, static_cast<std::uint32_t>(f.grid.dims()));
    for (const auto& a : f.grid.axes) {
        put(os, static_cast<std::int32_t>(a.n));
        put(os, a.lo);
        put(os, a.hi);
        put(os, static_cast<std::int32_t>(a.spacing));
    }
    put(os, static_cast<std::uint32_t>(f.channels()));
    // row-major nodes, channels-last
    for (long i = 0; i < f.values.rows(); ++i)
        for (int c = 0; c < f.channels(); ++c) put(os, f.values(i, c));
    if (!os) throw ConfigError("write failed for " + path.string());
    os.close();

    if (f.resolution_index) {
        nlohmann::json side;
        side["resolution_index"] = *f.resolution_index;
        write_text_file(path.string() + ".json", side.dump(2) + "\n");
    }
}

DiscretizedFunction load_function(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    if (get<std::uint32_t>(is) != kMagic) throw ConfigError("bad magic in " + path.string());
    if (get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported version in " + path.string());
    const auto dims = get<std::uint32_t>(is);
    std::vector<AxisSpec> axes;
    for (std::uint32_t a = 0; a < dims; ++a) {
        AxisSpec ax;
        ax.n = get<std::int32_t>(is);
        ax.lo = get<double>(is);
        ax.hi = get<double>(is);
        ax.spacing = static_cast<Spacing>(get<std::int32_t>(is));
        axes.push_back(ax);
    }
    GridSpec grid(axes);
    const auto channels = get<std::uint32_t>(is);
    Eigen::MatrixXd values(grid.num_nodes(), channels);
    for (long i = 0; i < values.rows(); ++i)
        for (std::uint32_t c = 0; c < channels; ++c) values(i, c) = get<double>(is);

    std::optional<int> rindex;
    const auto sidecar = std::filesystem::path(path.string() + ".json");
    if (std::filesystem::exists(sidecar)) {
        auto side = nlohmann::json::parse(read_text_file(sidecar));
        if (side.contains("resolution_index")) rindex = side["resolution_index"].get<int>();
    }
    return DiscretizedFunction(std::move(grid), std::move(values), rindex);
}

void save_doubles(const Eigen::VectorXd& v, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    const std::uint64_t n = static_cast<std::uint64_t>(v.size());
    put(os, n);
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(sizeof(double) * v.size()));
    if (!os) throw ConfigError("write failed for " + path.string());
}

Eigen::VectorXd load_doubles(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    const auto n = get<std::uint64_t>(is);
    Eigen::VectorXd v(static_cast<long>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
    if (!is) throw ConfigError("truncated file " + path.string());
    return v;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    os << text;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace mrfno
