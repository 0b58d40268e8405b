#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "blend/bytes.hpp"

namespace blend::storage {

inline constexpr std::size_t default_page_size = 2048;
inline constexpr std::size_t default_page_count = 256;  // 512 KiB
inline constexpr std::uint8_t erased_byte = 0xff;

/// NOR-style page flash. Programming can only clear bits; going back to 1
/// requires erasing the whole page.
class FlashDevice {
public:
    explicit FlashDevice(std::size_t page_size = default_page_size, std::size_t page_count = default_page_count);

    std::size_t page_size() const noexcept { return page_size_; }
    std::size_t page_count() const noexcept { return pages_.size(); }

    /// Throws Errc::flash_violation if a bit would go 0 -> 1.
    void program(std::size_t page, std::size_t offset, ByteView data);
    void erase(std::size_t page);
    ByteView read(std::size_t page, std::size_t offset, std::size_t length) const;

    std::uint64_t write_byte_count() const noexcept { return write_bytes_; }
    std::uint64_t erase_count() const noexcept { return erases_; }

private:
    void check_range(std::size_t page, std::size_t offset, std::size_t length) const;

    std::size_t page_size_;
    std::vector<Bytes> pages_;
    std::uint64_t write_bytes_ = 0;
    std::uint64_t erases_ = 0;
};

using FileId = std::uint32_t;

/// Append-oriented file abstraction over a FlashDevice. The file table lives
/// in RAM; file data lives in flash pages. Pages are erased only when a file
/// is removed, so append-only workloads never erase.
class FileStore {
public:
    explicit FileStore(FlashDevice& device);

    /// Creates the file on first append. Throws Errc::storage_full without
    /// writing anything when the data does not fit.
    void append(FileId id, ByteView data);

    Bytes read(FileId id, std::size_t offset, std::size_t length) const;
    Bytes read_all(FileId id) const;
    std::size_t size(FileId id) const;
    bool exists(FileId id) const;
    void remove(FileId id);
    std::vector<FileId> files() const;

    std::size_t free_bytes() const;
    const FlashDevice& device() const noexcept { return device_; }

private:
    struct File {
        std::vector<std::size_t> pages;
        std::size_t length = 0;
    };

    const File& lookup(FileId id) const;

    FlashDevice& device_;
    std::map<FileId, File> files_;
    std::vector<std::size_t> free_pages_;
};

}  // namespace blend::storage
