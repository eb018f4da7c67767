#include "sea/run_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "sea/common.hpp"

namespace sea {

namespace fs = std::filesystem;

RunLock::RunLock(const fs::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw RuntimeFailure("cannot open lock " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw RuntimeFailure("run directory is locked by another process: " + path.parent_path().string());
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::ftruncate(fd_, 0) == 0) {
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) {}

std::unique_ptr<RunStore> RunStore::create(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) {
    throw RuntimeFailure("run already exists: " + dir.string() + " (use resume)");
  }
  fs::create_directories(dir);
  std::unique_ptr<RunStore> s(new RunStore(dir));
  s->lock_ = std::make_unique<RunLock>(dir / "lock");
  return s;
}

std::unique_ptr<RunStore> RunStore::open(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw RuntimeFailure("no run at " + dir.string());
  std::unique_ptr<RunStore> s(new RunStore(dir));
  s->lock_ = std::make_unique<RunLock>(dir / "lock");
  return s;
}

std::ofstream& RunStore::stream(std::string_view file) {
  auto it = streams_.find(file);
  if (it != streams_.end()) return it->second;
  std::ofstream out(path(file), std::ios::binary | std::ios::app);
  if (!out) throw RuntimeFailure("cannot append to " + path(file).string());
  return streams_.emplace(std::string(file), std::move(out)).first->second;
}

void RunStore::append_line(std::string_view file, std::string_view line) {
  auto& out = stream(file);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  if (!out) throw RuntimeFailure("write failed: " + path(file).string());
}

void RunStore::flush() {
  for (auto& [name, out] : streams_) {
    out.flush();
    if (!out) throw RuntimeFailure("flush failed: " + path(name).string());
  }
}

std::uint64_t RunStore::size(std::string_view file) {
  if (auto it = streams_.find(file); it != streams_.end()) it->second.flush();
  std::error_code ec;
  auto n = fs::file_size(path(file), ec);
  return ec ? 0 : n;
}

void RunStore::truncate(std::string_view file, std::uint64_t size) {
  if (auto it = streams_.find(file); it != streams_.end()) {
    it->second.close();
    streams_.erase(it);
  }
  const fs::path p = path(file);
  if (!fs::exists(p)) {
    if (size == 0) return;
    throw RuntimeFailure(p.string() + " is missing but the checkpoint expects " +
                         std::to_string(size) + " bytes");
  }
  if (fs::file_size(p) < size) {
    throw RuntimeFailure(p.string() + " is shorter than the checkpoint expects");
  }
  fs::resize_file(p, size);
}

void RunStore::write_json(std::string_view file, const nlohmann::json& j) {
  write_file_atomic(path(file), j.dump(2) + "\n");
}

nlohmann::json RunStore::read_json(std::string_view file) const {
  auto j = nlohmann::json::parse(read_file(path(file)), nullptr, false);
  if (j.is_discarded()) throw RuntimeFailure(path(file).string() + " is not valid JSON");
  return j;
}

bool RunStore::exists(std::string_view file) const { return fs::exists(path(file)); }

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw RuntimeFailure(path.string() + ":" + std::to_string(n) + ": invalid JSON line");
    }
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace sea
