#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace tailedts::io {

/// Inflates a gzip (or zlib) stream. Throws std::runtime_error on corrupt or truncated input.
std::string gunzip(std::string_view compressed);

/// Deflates into a gzip stream with a zeroed header timestamp, so equal input gives equal bytes.
std::string gzip(std::string_view raw, int level = 6);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Reads a file, transparently inflating it when it carries the gzip magic bytes.
std::string read_maybe_gzip(const std::filesystem::path& path);

/// Streams gzip output to a file while tracking the compressed size and CRC-32.
class GzipFileWriter {
public:
    explicit GzipFileWriter(const std::filesystem::path& path, int level = 6);
    ~GzipFileWriter();
    GzipFileWriter(const GzipFileWriter&) = delete;
    GzipFileWriter& operator=(const GzipFileWriter&) = delete;

    void write(std::string_view raw);
    /// Flushes the stream; returns the CRC-32 of the compressed file bytes.
    std::uint32_t finish();
    std::uint64_t compressed_bytes() const { return compressed_bytes_; }

private:
    void pump(int flush);

    struct State;
    std::unique_ptr<State> state_;
    std::ofstream out_;
    std::filesystem::path path_;
    std::uint64_t compressed_bytes_ = 0;
    std::uint32_t crc_ = 0;
    bool finished_ = false;
};

/// Inflates `compressed` incrementally and calls `on_line` for every '\n'-terminated line (the
/// trailing '\r' and '\n' are stripped). A final unterminated line is delivered as well.
void for_each_gzip_line(std::string_view compressed,
                        const std::function<void(std::string_view)>& on_line);

/// Same contract for uncompressed text.
void for_each_line(std::string_view text, const std::function<void(std::string_view)>& on_line);

std::uint32_t crc32(std::string_view bytes);
std::uint32_t crc32_update(std::uint32_t crc, std::string_view bytes);
std::string crc32_hex(std::string_view bytes);

/// RFC 4180 quoting: fields containing separators, quotes or line breaks are wrapped.
void append_csv_field(std::string& out, std::string_view field);

/// Splits one CSV record (no trailing newline); understands quoted fields.
std::vector<std::string> split_csv_record(std::string_view line);

/// Splits CSV text into records, keeping quoted newlines inside fields.
std::vector<std::string_view> csv_records(std::string_view text);

}  // namespace tailedts::io
