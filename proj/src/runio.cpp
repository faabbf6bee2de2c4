#include "mdraft/runio.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <ctime>
#include <filesystem>

#include "mdraft/text.hpp"

namespace mdraft {
namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw IoError("checkpoint field '" + what + "' is not a matrix");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw IoError("checkpoint field '" + what + "' has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw IoError("checkpoint field '" + what + "' is not a vector");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

RunLock::RunLock(const std::string& dir) : path_(dir + "/lock") {
  std::filesystem::create_directories(dir);
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw LockHeld("run directory is locked (remove " + path_ +
                   " if no other run is using it)");
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() { ::unlink(path_.c_str()); }

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot write file: " + path);
  write_row(header);
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw IoError("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                  std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void CsvWriter::flush() { out_.flush(); }

JsonlWriter::JsonlWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot write file: " + path);
}

void JsonlWriter::write(const nlohmann::json& record) { out_ << record.dump() << '\n'; }

void JsonlWriter::flush() { out_.flush(); }

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void save_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["artifacts"] = m.artifacts;
  j["code_version"] = m.code_version;
  j["config_hash"] = m.config_hash;
  j["finished_at"] = m.finished_at;
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["status"] = m.status;
  write_json_file(path, j);
}

RunManifest load_manifest(const std::string& path) {
  nlohmann::json j = load_json_file(path);
  RunManifest m;
  try {
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    m.code_version = j.at("code_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started_at = j.at("started_at").get<std::string>();
    m.status = j.at("status").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path + ": " + e.what());
  }
  return m;
}

void save_policy_checkpoint(const std::string& path, const PolicyParams& theta,
                            const ValueParams& psi) {
  nlohmann::json j;
  j["agent_id"] = theta.agent_id;
  j["version"] = theta.version;
  j["weights"] = matrix_to_json(theta.weights);
  j["bias"] = vector_to_json(theta.bias);
  nlohmann::json critic;
  critic["version"] = psi.version;
  critic["weights"] = vector_to_json(psi.weights);
  critic["bias"] = psi.bias;
  j["critic"] = std::move(critic);
  write_json_file(path, j);
}

void load_policy_checkpoint(const std::string& path, PolicyParams& theta, ValueParams& psi) {
  nlohmann::json j = load_json_file(path);
  try {
    theta.agent_id = j.at("agent_id").get<int>();
    theta.version = j.at("version").get<int>();
    theta.weights = matrix_from_json(j.at("weights"), "weights");
    theta.bias = vector_from_json(j.at("bias"), "bias");
    const auto& critic = j.at("critic");
    psi.agent_id = theta.agent_id;
    psi.version = critic.at("version").get<int>();
    psi.weights = vector_from_json(critic.at("weights"), "critic.weights");
    psi.bias = critic.at("bias").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
}

void save_reward_checkpoint(const std::string& path, const RewardModelParams& phi) {
  nlohmann::json j;
  j["version"] = phi.version;
  j["w1"] = matrix_to_json(phi.w1);
  j["b1"] = vector_to_json(phi.b1);
  j["w2"] = vector_to_json(phi.w2);
  j["b2"] = phi.b2;
  write_json_file(path, j);
}

RewardModelParams load_reward_checkpoint(const std::string& path) {
  nlohmann::json j = load_json_file(path);
  RewardModelParams phi;
  try {
    phi.version = j.at("version").get<int>();
    phi.w1 = matrix_from_json(j.at("w1"), "w1");
    phi.b1 = vector_from_json(j.at("b1"), "b1");
    phi.w2 = vector_from_json(j.at("w2"), "w2");
    phi.b2 = j.at("b2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
  return phi;
}

}  // namespace mdraft
