#include "blend/flash.hpp"

#include <algorithm>

#include "blend/error.hpp"

namespace blend::storage {

FlashDevice::FlashDevice(std::size_t page_size, std::size_t page_count)
    : page_size_(page_size), pages_(page_count, Bytes(page_size, erased_byte)) {
    if (page_size == 0 || page_count == 0) throw Error(Errc::invalid_argument, "flash geometry must be non-zero");
}

void FlashDevice::check_range(std::size_t page, std::size_t offset, std::size_t length) const {
    if (page >= pages_.size() || offset > page_size_ || length > page_size_ - offset)
        throw Error(Errc::invalid_argument, "flash access out of range");
}

void FlashDevice::program(std::size_t page, std::size_t offset, ByteView data) {
    check_range(page, offset, data.size());
    auto& p = pages_[page];
    for (std::size_t i = 0; i < data.size(); ++i) {
        if ((p[offset + i] & data[i]) != data[i])
            throw Error(Errc::flash_violation, "page " + std::to_string(page) + " offset " + std::to_string(offset + i));
    }
    std::copy(data.begin(), data.end(), p.begin() + static_cast<std::ptrdiff_t>(offset));
    write_bytes_ += data.size();
}

void FlashDevice::erase(std::size_t page) {
    check_range(page, 0, 0);
    std::fill(pages_[page].begin(), pages_[page].end(), erased_byte);
    ++erases_;
}

ByteView FlashDevice::read(std::size_t page, std::size_t offset, std::size_t length) const {
    check_range(page, offset, length);
    return ByteView(pages_[page]).subspan(offset, length);
}

FileStore::FileStore(FlashDevice& device) : device_(device) {
    // Highest page at the back so pages are handed out in ascending order.
    for (std::size_t p = device.page_count(); p-- > 0;) free_pages_.push_back(p);
}

const FileStore::File& FileStore::lookup(FileId id) const {
    auto it = files_.find(id);
    if (it == files_.end()) throw Error(Errc::invalid_argument, "no such file " + std::to_string(id));
    return it->second;
}

std::size_t FileStore::free_bytes() const {
    std::size_t tail = 0;
    for (const auto& [id, f] : files_) tail += f.pages.size() * device_.page_size() - f.length;
    return free_pages_.size() * device_.page_size() + tail;
}

void FileStore::append(FileId id, ByteView data) {
    const std::size_t ps = device_.page_size();
    auto existing = files_.find(id);
    const std::size_t length = existing == files_.end() ? 0 : existing->second.length;
    const std::size_t capacity = existing == files_.end() ? 0 : existing->second.pages.size() * ps;
    const std::size_t needed = length + data.size() > capacity ? (length + data.size() - capacity + ps - 1) / ps : 0;
    if (needed > free_pages_.size()) throw Error(Errc::storage_full, "need " + std::to_string(needed) + " pages");

    File& f = files_[id];
    for (std::size_t i = 0; i < needed; ++i) {
        f.pages.push_back(free_pages_.back());
        free_pages_.pop_back();
    }
    std::size_t written = 0;
    while (written < data.size()) {
        const std::size_t pos = f.length + written;
        const std::size_t page_off = pos % ps;
        const std::size_t chunk = std::min(ps - page_off, data.size() - written);
        device_.program(f.pages[pos / ps], page_off, data.subspan(written, chunk));
        written += chunk;
    }
    f.length += data.size();
}

Bytes FileStore::read(FileId id, std::size_t offset, std::size_t length) const {
    const File& f = lookup(id);
    if (offset > f.length || length > f.length - offset) throw Error(Errc::end_of_data, "read past end of file");
    const std::size_t ps = device_.page_size();
    Bytes out;
    out.reserve(length);
    std::size_t done = 0;
    while (done < length) {
        const std::size_t pos = offset + done;
        const std::size_t chunk = std::min(ps - pos % ps, length - done);
        blend::append(out, device_.read(f.pages[pos / ps], pos % ps, chunk));
        done += chunk;
    }
    return out;
}

Bytes FileStore::read_all(FileId id) const { return read(id, 0, lookup(id).length); }

std::size_t FileStore::size(FileId id) const { return lookup(id).length; }

bool FileStore::exists(FileId id) const { return files_.count(id) != 0; }

void FileStore::remove(FileId id) {
    auto it = files_.find(id);
    if (it == files_.end()) return;
    for (auto page : it->second.pages) {
        device_.erase(page);
        free_pages_.push_back(page);
    }
    files_.erase(it);
}

std::vector<FileId> FileStore::files() const {
    std::vector<FileId> ids;
    for (const auto& [id, f] : files_) ids.push_back(id);
    return ids;
}

}  // namespace blend::storage
