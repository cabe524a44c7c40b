#include "toploc/cloud_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "toploc/error.hpp"

namespace toploc {

namespace {

constexpr char kMagic[4] = {'T', 'L', 'P', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagHasTime = 1u;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const std::filesystem::path& path) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("truncated cloud file: " + path.string());
}

}  // namespace

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for write: " + path.string());
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint64_t>(cloud.size()));
    const std::uint32_t flags = cloud.has_times() ? kFlagHasTime : 0u;
    write_pod(os, flags);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        write_pod(os, cloud.points[i].x());
        write_pod(os, cloud.points[i].y());
        write_pod(os, cloud.points[i].z());
        if (flags & kFlagHasTime) write_pod(os, cloud.times[i]);
    }
    if (!os) throw DataError("write failed: " + path.string());
}

PointCloud load_cloud(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open cloud file: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("bad magic in cloud file: " + path.string());
    std::uint32_t version = 0;
    read_pod(is, version, path);
    if (version != kVersion)
        throw DataError("unsupported cloud version in " + path.string());
    std::uint64_t count = 0;
    std::uint32_t flags = 0;
    read_pod(is, count, path);
    read_pod(is, flags, path);

    PointCloud cloud;
    cloud.points.resize(count);
    const bool has_time = flags & kFlagHasTime;
    if (has_time) cloud.times.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        double x, y, z;
        read_pod(is, x, path);
        read_pod(is, y, path);
        read_pod(is, z, path);
        cloud.points[i] = Vec3(x, y, z);
        if (has_time) read_pod(is, cloud.times[i], path);
    }
    return cloud;
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for write: " + path.string());
    os << "ply\nformat ascii 1.0\n";
    os << "element vertex " << cloud.size() << "\n";
    os << "property double x\nproperty double y\nproperty double z\n";
    if (cloud.has_times()) os << "property double t\n";
    os << "end_header\n";
    os.precision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        os << cloud.points[i].x() << ' ' << cloud.points[i].y() << ' ' << cloud.points[i].z();
        if (cloud.has_times()) os << ' ' << cloud.times[i];
        os << '\n';
    }
}

PointCloud load_ply(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open ply file: " + path.string());
    std::string line;
    std::size_t count = 0;
    bool has_time = false;
    std::vector<std::string> props;
    if (!std::getline(is, line) || line != "ply") throw DataError("not a ply file: " + path.string());
    while (std::getline(is, line)) {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "element") {
            std::string what;
            ss >> what >> count;
            if (what != "vertex") throw DataError("unsupported ply element in " + path.string());
        } else if (tok == "property") {
            std::string type, name;
            ss >> type >> name;
            props.push_back(name);
            if (name == "t") has_time = true;
        } else if (tok == "end_header") {
            break;
        }
    }
    PointCloud cloud;
    cloud.points.reserve(count);
    if (has_time) cloud.times.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw DataError("truncated ply file: " + path.string());
        std::istringstream ss(line);
        double x, y, z, t = 0.0;
        if (!(ss >> x >> y >> z)) throw DataError("bad ply row in " + path.string());
        if (has_time && !(ss >> t)) throw DataError("bad ply row in " + path.string());
        cloud.points.emplace_back(x, y, z);
        if (has_time) cloud.times.push_back(t);
    }
    return cloud;
}

}  // namespace toploc
