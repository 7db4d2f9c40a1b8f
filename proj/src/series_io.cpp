#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "msm/errors.hpp"
#include "msm/simulate.hpp"

namespace msm {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'S', 'M', '1'};

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, long line) {
    double v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw FormatError("cannot parse number '" + s + "' on line " + std::to_string(line));
    return v;
}

template <class T>
void put_le(std::ostream& os, T v) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw FormatError("truncated binary series");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    const auto len = get_le<std::uint32_t>(is);
    std::string s(len, '\0');
    if (len && !is.read(s.data(), len)) throw FormatError("truncated binary series");
    return s;
}

}  // namespace

void write_series_csv(const IncrementSeries& s, std::ostream& os) {
    os << "# delta," << shortest(s.delta) << "\n";
    os << "# seed," << s.meta.seed << "\n";
    os << "# method," << s.meta.method << "\n";
    os << "# model," << s.meta.model.dump() << "\n";
    os << "increment\n";
    for (long i = 0; i < s.n(); ++i) os << shortest(s.increments[i]) << "\n";
}

IncrementSeries read_series_csv(std::istream& is) {
    IncrementSeries s;
    std::vector<double> xs;
    std::string line;
    long lineno = 0;
    bool have_delta = false, have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            std::string key = line.substr(1, comma - 1);
            key.erase(0, key.find_first_not_of(' '));
            const std::string val = line.substr(comma + 1);
            if (key == "delta") {
                s.delta = parse_double(val, lineno);
                have_delta = true;
            } else if (key == "seed") {
                s.meta.seed = std::stoull(val);
            } else if (key == "method") {
                s.meta.method = val;
            } else if (key == "model") {
                try {
                    s.meta.model = nlohmann::ordered_json::parse(val);
                } catch (const nlohmann::json::exception& e) {
                    throw FormatError(std::string("invalid model JSON: ") + e.what());
                }
            }
            continue;
        }
        if (!have_header) {
            have_header = true;
            if (line == "increment") continue;
        }
        xs.push_back(parse_double(line, lineno));
    }
    if (!have_delta) throw FormatError("series CSV lacks the '# delta,' header line");
    if (xs.size() < 2) throw FormatError("series CSV holds fewer than 2 increments");
    s.increments = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<long>(xs.size()));
    s.t_end = double(s.n()) * s.delta;
    s.validate();
    return s;
}

void write_series_binary(const IncrementSeries& s, std::ostream& os) {
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(s.n()));
    put_le<double>(os, s.delta);
    put_le<std::uint64_t>(os, s.meta.seed);
    put_string(os, s.meta.method);
    put_string(os, s.meta.model.dump());
    for (long i = 0; i < s.n(); ++i) put_le<double>(os, s.increments[i]);
}

IncrementSeries read_series_binary(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("missing MSM1 magic bytes");
    IncrementSeries s;
    const auto n = get_le<std::uint64_t>(is);
    s.delta = get_le<double>(is);
    s.meta.seed = get_le<std::uint64_t>(is);
    s.meta.method = get_string(is);
    const std::string model = get_string(is);
    try {
        s.meta.model = model.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json::parse(model);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid model JSON: ") + e.what());
    }
    if (n > (1ULL << 34)) throw FormatError("implausible series length");
    s.increments.resize(static_cast<long>(n));
    for (std::uint64_t i = 0; i < n; ++i) s.increments[static_cast<long>(i)] = get_le<double>(is);
    s.t_end = double(s.n()) * s.delta;
    s.validate();
    return s;
}

IncrementSeries read_series(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    std::array<char, 4> head{};
    f.read(head.data(), head.size());
    const bool binary = f.gcount() == 4 && head == kMagic;
    f.clear();
    f.seekg(0);
    return binary ? read_series_binary(f) : read_series_csv(f);
}

void write_series_csv(const IncrementSeries& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path);
    write_series_csv(s, f);
}

void write_series(const IncrementSeries& s, const std::string& path) {
    const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path);
    if (binary)
        write_series_binary(s, f);
    else
        write_series_csv(s, f);
}

}  // namespace msm
