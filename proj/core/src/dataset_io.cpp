#include "vlfsig/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vlfsig/errors.hpp"

namespace vlfsig {

namespace {

static_assert(std::endian::native == std::endian::little,
              "dataset I/O assumes a little-endian host");

void check_writable(const std::string& path, bool force) {
    if (!force && std::filesystem::exists(path))
        throw IoError("output path '" + path + "' exists; pass --force to overwrite");
}

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, std::size_t& offset, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw ParseError(std::string("truncated dataset file while reading ") + what + ": expected " +
                             std::to_string(sizeof(T)) + " bytes, got " +
                             std::to_string(in.gcount()),
                         offset);
    offset += sizeof(T);
    return v;
}

}  // namespace

std::size_t dataset_file_bytes(std::size_t n_records, std::size_t record_len) {
    return kDatasetHeaderBytes + n_records * (1 + 4 * record_len);
}

void write_dataset(const std::string& path, const datagen::Dataset& records, bool force) {
    check_writable(path, force);
    const std::size_t len = records.empty() ? 0 : records[0].samples.size();
    for (const auto& r : records)
        if (r.samples.size() != len)
            throw IoError("dataset records have inconsistent lengths");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kDatasetMagic, 4);
    put<std::uint16_t>(out, kDatasetVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(len));
    for (const auto& r : records) {
        put<std::uint8_t>(out, static_cast<std::uint8_t>(r.label));
        for (double v : r.samples) put<float>(out, static_cast<float>(v));
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

datagen::Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");
    std::size_t offset = 0;
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw ParseError("bad dataset magic; expected 'VLFD'", 0);
    offset += 4;
    const auto version = take<std::uint16_t>(in, offset, "version");
    if (version != kDatasetVersion)
        throw ParseError("unsupported dataset version " + std::to_string(version), 4);
    const auto count = take<std::uint32_t>(in, offset, "record count");
    const auto len = take<std::uint32_t>(in, offset, "record length");

    datagen::Dataset out;
    out.reserve(count);
    std::vector<float> buf(len);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto label = take<std::uint8_t>(in, offset, "record label");
        if (label >= datagen::kNumClasses)
            throw ParseError("record label " + std::to_string(int(label)) + " out of range [0," +
                                 std::to_string(datagen::kNumClasses) + ")",
                             offset - 1);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(4 * len));
        if (in.gcount() != static_cast<std::streamsize>(4 * len))
            throw ParseError("truncated record payload: expected " + std::to_string(4 * len) +
                                 " bytes, got " + std::to_string(in.gcount()),
                             offset);
        offset += 4 * len;
        datagen::SignalRecord rec;
        rec.label = label;
        rec.samples.assign(buf.begin(), buf.end());
        out.push_back(std::move(rec));
    }
    char extra;
    if (in.read(&extra, 1))
        throw ParseError("trailing bytes after the last declared record", offset);
    return out;
}

void write_dataset_csv(const std::string& path, const datagen::Dataset& records, bool force) {
    check_writable(path, force);
    const std::size_t len = records.empty() ? 0 : records[0].samples.size();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "label";
    for (std::size_t i = 0; i < len; ++i) out << ",s" << i;
    out << "\n";
    out.precision(9);
    for (const auto& r : records) {
        out << r.label;
        for (double v : r.samples) out << ',' << static_cast<float>(v);
        out << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

datagen::Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV dataset file", 0);
    if (line.rfind("label", 0) != 0)
        throw ParseError("CSV header must start with 'label'", 0);
    datagen::Dataset out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw ParseError("CSV line " + std::to_string(line_no) + " is malformed");
        datagen::SignalRecord rec;
        try {
            rec.label = std::stoi(cell);
        } catch (const std::exception&) {
            throw ParseError("CSV line " + std::to_string(line_no) + " has a non-numeric label");
        }
        if (rec.label < 0 || rec.label >= datagen::kNumClasses)
            throw ParseError("CSV line " + std::to_string(line_no) + " label out of range");
        while (std::getline(ss, cell, ',')) {
            try {
                rec.samples.push_back(static_cast<double>(std::stof(cell)));
            } catch (const std::exception&) {
                throw ParseError("CSV line " + std::to_string(line_no) + " has a non-numeric sample");
            }
        }
        if (!out.empty() && rec.samples.size() != out[0].samples.size())
            throw ParseError("CSV line " + std::to_string(line_no) + " has " +
                             std::to_string(rec.samples.size()) + " samples, expected " +
                             std::to_string(out[0].samples.size()));
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace vlfsig
