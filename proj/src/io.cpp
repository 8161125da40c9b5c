#include "tailedts/io.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tailedts::io {

std::string gunzip(std::string_view compressed) {
    z_stream zs{};
    // 32 + 15: auto-detect gzip or zlib header.
    if (inflateInit2(&zs, 32 + 15) != Z_OK) throw std::runtime_error("inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());

    std::string out;
    std::array<char, 1 << 16> buffer{};
    int ret = Z_OK;
    while (true) {
        zs.next_out = reinterpret_cast<Bytef*>(buffer.data());
        zs.avail_out = static_cast<uInt>(buffer.size());
        ret = inflate(&zs, Z_NO_FLUSH);
        out.append(buffer.data(), buffer.size() - zs.avail_out);
        if (ret == Z_STREAM_END) {
            // Concatenated gzip members are legal; continue with the next one.
            if (zs.avail_in > 0) {
                inflateReset(&zs);
                continue;
            }
            break;
        }
        if (ret != Z_OK) break;
        if (zs.avail_in == 0 && zs.avail_out != 0) {
            ret = Z_BUF_ERROR;
            break;
        }
    }
    inflateEnd(&zs);
    if (ret != Z_STREAM_END) {
        throw std::runtime_error(fmt::format("corrupt or truncated gzip stream (zlib code {})", ret));
    }
    return out;
}

std::string gzip(std::string_view raw, int level) {
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, 16 + 15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw std::runtime_error("deflateInit2 failed");
    }
    gz_header header{};
    header.os = 255;  // "unknown", fixed regardless of the host
    deflateSetHeader(&zs, &header);

    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
    zs.avail_in = static_cast<uInt>(raw.size());
    std::string out;
    std::array<char, 1 << 16> buffer{};
    int ret = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buffer.data());
        zs.avail_out = static_cast<uInt>(buffer.size());
        ret = deflate(&zs, Z_FINISH);
        out.append(buffer.data(), buffer.size() - zs.avail_out);
    } while (ret == Z_OK);
    deflateEnd(&zs);
    if (ret != Z_STREAM_END) throw std::runtime_error("deflate failed");
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw std::runtime_error(fmt::format("error reading '{}'", path.string()));
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error(fmt::format("error writing '{}'", path.string()));
}

std::string read_maybe_gzip(const std::filesystem::path& path) {
    std::string bytes = read_file(path);
    if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
        static_cast<unsigned char>(bytes[1]) == 0x8b) {
        return gunzip(bytes);
    }
    return bytes;
}

struct GzipFileWriter::State {
    z_stream zs{};
    gz_header header{};
};

GzipFileWriter::GzipFileWriter(const std::filesystem::path& path, int level)
    : state_(std::make_unique<State>()), path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    if (deflateInit2(&state_->zs, level, Z_DEFLATED, 16 + 15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw std::runtime_error("deflateInit2 failed");
    }
    state_->header.os = 255;
    deflateSetHeader(&state_->zs, &state_->header);
}

GzipFileWriter::~GzipFileWriter() { deflateEnd(&state_->zs); }

void GzipFileWriter::pump(int flush) {
    std::array<char, 1 << 16> buffer{};
    auto& zs = state_->zs;
    int ret = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buffer.data());
        zs.avail_out = static_cast<uInt>(buffer.size());
        ret = deflate(&zs, flush);
        if (ret == Z_STREAM_ERROR) throw std::runtime_error("deflate failed");
        const std::size_t produced = buffer.size() - zs.avail_out;
        if (produced > 0) {
            const std::string_view chunk(buffer.data(), produced);
            out_.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
            crc_ = crc32_update(crc_, chunk);
            compressed_bytes_ += produced;
        }
    } while (zs.avail_out == 0 || (flush == Z_FINISH && ret != Z_STREAM_END));
    if (!out_) throw std::runtime_error(fmt::format("error writing '{}'", path_.string()));
}

void GzipFileWriter::write(std::string_view raw) {
    if (finished_) throw std::logic_error("write after finish");
    auto& zs = state_->zs;
    while (!raw.empty()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(raw.size(), 1u << 30));
        zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
        zs.avail_in = chunk;
        pump(Z_NO_FLUSH);
        raw.remove_prefix(chunk);
    }
}

std::uint32_t GzipFileWriter::finish() {
    if (!finished_) {
        state_->zs.next_in = nullptr;
        state_->zs.avail_in = 0;
        pump(Z_FINISH);
        out_.close();
        if (!out_) throw std::runtime_error(fmt::format("error closing '{}'", path_.string()));
        finished_ = true;
    }
    return crc_;
}

void for_each_line(std::string_view text, const std::function<void(std::string_view)>& on_line) {
    std::size_t begin = 0;
    while (begin < text.size()) {
        std::size_t end = text.find('\n', begin);
        const std::size_t next = end == std::string_view::npos ? text.size() : end + 1;
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(begin, end - begin);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        on_line(line);
        begin = next;
    }
}

void for_each_gzip_line(std::string_view compressed,
                        const std::function<void(std::string_view)>& on_line) {
    z_stream zs{};
    if (inflateInit2(&zs, 32 + 15) != Z_OK) throw std::runtime_error("inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());

    std::string pending;
    std::array<char, 1 << 16> buffer{};
    int ret = Z_OK;
    try {
        while (true) {
            zs.next_out = reinterpret_cast<Bytef*>(buffer.data());
            zs.avail_out = static_cast<uInt>(buffer.size());
            ret = inflate(&zs, Z_NO_FLUSH);
            pending.append(buffer.data(), buffer.size() - zs.avail_out);
            // Emit complete lines, keep the tail for the next chunk.
            const std::size_t last_newline = pending.rfind('\n');
            if (last_newline != std::string::npos) {
                for_each_line(std::string_view(pending).substr(0, last_newline + 1), on_line);
                pending.erase(0, last_newline + 1);
            }
            if (ret == Z_STREAM_END) {
                if (zs.avail_in > 0) {
                    inflateReset(&zs);
                    continue;
                }
                break;
            }
            if (ret != Z_OK) break;
            if (zs.avail_in == 0 && zs.avail_out != 0) {
                ret = Z_BUF_ERROR;
                break;
            }
        }
    } catch (...) {
        inflateEnd(&zs);
        throw;
    }
    inflateEnd(&zs);
    if (ret != Z_STREAM_END) {
        throw std::runtime_error(fmt::format("corrupt or truncated gzip stream (zlib code {})", ret));
    }
    if (!pending.empty()) for_each_line(pending, on_line);
}

std::uint32_t crc32(std::string_view bytes) { return crc32_update(0, bytes); }

std::uint32_t crc32_update(std::uint32_t start, std::string_view bytes) {
    uLong crc = start;
    const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
    std::size_t left = bytes.size();
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = ::crc32(crc, data, chunk);
        data += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string crc32_hex(std::string_view bytes) { return fmt::format("{:08x}", crc32(bytes)); }

void append_csv_field(std::string& out, std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

std::vector<std::string> split_csv_record(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (quoted) throw std::runtime_error("unterminated quoted CSV field");
    fields.push_back(std::move(current));
    return fields;
}

std::vector<std::string_view> csv_records(std::string_view text) {
    std::vector<std::string_view> records;
    std::size_t begin = 0;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '"') {
            quoted = !quoted;
        } else if (c == '\n' && !quoted) {
            std::size_t end = i;
            if (end > begin && text[end - 1] == '\r') --end;
            records.push_back(text.substr(begin, end - begin));
            begin = i + 1;
        }
    }
    if (begin < text.size()) {
        std::size_t end = text.size();
        if (text[end - 1] == '\r') --end;
        records.push_back(text.substr(begin, end - begin));
    }
    return records;
}

}  // namespace tailedts::io
