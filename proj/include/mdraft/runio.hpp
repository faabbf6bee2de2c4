#ifndef MDRAFT_RUNIO_HPP
#define MDRAFT_RUNIO_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdraft/error.hpp"
#include "mdraft/policy.hpp"
#include "mdraft/reward.hpp"
#include "mdraft/rl.hpp"

namespace mdraft {

struct LockHeld : Error {
  explicit LockHeld(const std::string& what) : Error(what) {}
};

// Exclusive ownership of a run directory, enforced via a lock file created
// with O_EXCL. Released (unlinked) on destruction.
class RunLock {
 public:
  explicit RunLock(const std::string& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

// Append-only CSV with a fixed header; numeric cells use round-trip
// formatting so identical values always produce identical bytes.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& cells);
  void flush();

 private:
  std::ofstream out_;
  std::size_t columns_;
};

// One JSON object per line. Callers pass nlohmann objects; keys serialize in
// sorted order, which keeps logs byte-stable.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const nlohmann::json& record);
  void flush();

 private:
  std::ofstream out_;
};

std::string iso8601_utc_now();

struct RunManifest {
  std::string config_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::string status;  // running | completed | stopped_early | failed
  std::vector<std::string> artifacts;
};

void save_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

// Checkpoints are JSON; doubles survive a save/load round trip bit-exactly.
void save_policy_checkpoint(const std::string& path, const PolicyParams& theta,
                            const ValueParams& psi);
void load_policy_checkpoint(const std::string& path, PolicyParams& theta, ValueParams& psi);

void save_reward_checkpoint(const std::string& path, const RewardModelParams& phi);
RewardModelParams load_reward_checkpoint(const std::string& path);

}  // namespace mdraft

#endif  // MDRAFT_RUNIO_HPP
