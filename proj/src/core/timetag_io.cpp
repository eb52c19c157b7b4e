#include "fbent/timetag_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fbent/error.hpp"

namespace fbent {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::ostream& os, T value)
{
    std::array<unsigned char, sizeof(T)> buf;
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t k = 0; k < sizeof(T); ++k)
        buf[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xffu);
    os.write(reinterpret_cast<const char*>(buf.data()), sizeof(T));
}

template <class T>
T get_le(const unsigned char* p)
{
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k)
        bits |= static_cast<std::uint64_t>(p[k]) << (8 * k);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}

template <class T>
T read_le(std::istream& is, const char* what)
{
    std::array<unsigned char, sizeof(T)> buf;
    if (!is.read(reinterpret_cast<char*>(buf.data()), sizeof(T)))
        throw DataError(std::string("truncated input while reading ") + what);
    return get_le<T>(buf.data());
}

} // namespace

void write_tags_binary(std::ostream& os, const TimeTagStream& stream)
{
    os.write(kTagMagic, sizeof(kTagMagic));
    put_le<std::uint32_t>(os, kTagVersion);
    put_le<std::uint32_t>(os, 0);
    std::vector<unsigned char> buf;
    buf.reserve(9 * 4096);
    for (const auto& r : stream.records) {
        buf.push_back(r.channel);
        for (int k = 0; k < 8; ++k)
            buf.push_back(static_cast<unsigned char>((r.timestamp_ps >> (8 * k)) & 0xffu));
        if (buf.size() >= 9 * 4096) {
            os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os)
        throw DataError("failed to write time-tag stream");
}

TimeTagStream read_tags_binary(std::istream& is)
{
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kTagMagic, sizeof(magic)) != 0)
        throw DataError("time-tag file: bad magic");
    const auto version = read_le<std::uint32_t>(is, "header");
    read_le<std::uint32_t>(is, "header");
    if (version != kTagVersion)
        throw DataError("time-tag file: unsupported version " + std::to_string(version));
    const std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (body.size() % 9 != 0)
        throw DataError("time-tag file: truncated record");
    TimeTagStream s;
    s.records.reserve(body.size() / 9);
    const auto* p = reinterpret_cast<const unsigned char*>(body.data());
    for (std::size_t off = 0; off < body.size(); off += 9)
        s.records.push_back({p[off], get_le<std::uint64_t>(p + off + 1)});
    s.validate();
    return s;
}

void write_tags_csv(std::ostream& os, const TimeTagStream& stream)
{
    os << "channel,timestamp_ps\n";
    for (const auto& r : stream.records)
        os << static_cast<unsigned>(r.channel) << ',' << r.timestamp_ps << '\n';
    if (!os)
        throw DataError("failed to write time-tag CSV");
}

TimeTagStream read_tags_csv(std::istream& is)
{
    TimeTagStream s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || (lineno == 1 && line.rfind("channel", 0) == 0))
            continue;
        const auto comma = line.find(',');
        unsigned ch = 0;
        std::uint64_t ts = 0;
        const char* b = line.data();
        const char* e = b + line.size();
        if (comma == std::string::npos ||
            std::from_chars(b, b + comma, ch).ec != std::errc{} ||
            std::from_chars(b + comma + 1, e, ts).ptr != e || ch > 255)
            throw DataError("time-tag CSV: malformed line " + std::to_string(lineno));
        s.records.push_back({static_cast<std::uint8_t>(ch), ts});
    }
    s.validate();
    return s;
}

TimeTagStream read_tags_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open " + path);
    char head[8] = {};
    is.read(head, sizeof(head));
    const bool binary = is.gcount() == 8 && std::memcmp(head, kTagMagic, 8) == 0;
    is.clear();
    is.seekg(0);
    return binary ? read_tags_binary(is) : read_tags_csv(is);
}

void write_tags_file(const std::string& path, const TimeTagStream& stream, bool csv)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError("cannot write " + path);
    if (csv)
        write_tags_csv(os, stream);
    else
        write_tags_binary(os, stream);
}

void write_histogram_binary(std::ostream& os, const JtiHistogram& h)
{
    put_le<double>(os, h.bin_width);
    put_le<double>(os, h.t0_s);
    put_le<double>(os, h.t0_i);
    put_le<std::uint64_t>(os, h.n_s);
    put_le<std::uint64_t>(os, h.n_i);
    for (auto c : h.counts)
        put_le<std::uint32_t>(os, c);
    if (!os)
        throw DataError("failed to write histogram");
}

JtiHistogram read_histogram_binary(std::istream& is)
{
    JtiHistogram h;
    h.bin_width = read_le<double>(is, "histogram header");
    h.t0_s = read_le<double>(is, "histogram header");
    h.t0_i = read_le<double>(is, "histogram header");
    h.n_s = read_le<std::uint64_t>(is, "histogram header");
    h.n_i = read_le<std::uint64_t>(is, "histogram header");
    if (!(h.bin_width > 0.0))
        throw DataError("histogram file: bin width must be positive");
    if (h.n_s != 0 && h.n_i > (std::uint64_t{1} << 40) / h.n_s)
        throw DataError("histogram file: implausible dimensions");
    h.counts.resize(h.n_s * h.n_i);
    for (auto& c : h.counts)
        c = read_le<std::uint32_t>(is, "histogram payload");
    return h;
}

void write_histogram_csv(std::ostream& os, const JtiHistogram& h)
{
    os << "ts_center_s,ti_center_s,count\n";
    os.precision(12);
    for (std::size_t is = 0; is < h.n_s; ++is)
        for (std::size_t ii = 0; ii < h.n_i; ++ii)
            if (h.at(is, ii) != 0)
                os << h.center_s(is) << ',' << h.center_i(ii) << ',' << h.at(is, ii) << '\n';
}

} // namespace fbent
