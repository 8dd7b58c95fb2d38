#pragma once

// Materialized orchestration state rebuilt from the append-only event log,
// and the log file itself.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdguard/orchestration.hpp"
#include "crowdguard/wire.hpp"

namespace crowdguard {

// Event constructors. Every event carries "type"; EventLog adds "seq".
namespace events {
Json worker_assigned(const std::string& worker_id, ConditionId condition, const std::string& token,
                     std::int64_t at);
Json hit_issued(const Hit& hit, std::int64_t at);
Json response_recorded(const ResponseRecord& r);
// `skip` is the skip_replaced record for the old question.
Json question_replaced(const std::string& hit_id, const std::string& question_id,
                       const Question& replacement, const ResponseRecord& skip);
Json rule_submitted(const RuleSubmission& s);
}  // namespace events

struct IssuedHit {
  Hit hit;
  // Questions taken out by a skip, in replacement order.
  std::vector<Question> replaced;
  std::int64_t issued_at = 0;
};

class ExperimentState {
 public:
  ExperimentState() = default;
  explicit ExperimentState(ConditionTable table) : table_(std::move(table)) {}

  // Throws Error(parse) for unknown event types and events that contradict
  // the state built so far.
  void apply(const Json& event);

  const WorkerProfile* worker(const std::string& worker_id) const;
  const std::string* worker_for_token(const std::string& token) const;
  std::string token_for(const std::string& worker_id) const;
  const IssuedHit* hit(const std::string& hit_id) const;
  // Latest HIT of the worker if it still has unanswered questions.
  const IssuedHit* open_hit(const std::string& worker_id) const;
  bool hit_complete(const std::string& hit_id) const;
  // The HIT a current or replaced question belongs to.
  const IssuedHit* hit_of_question(const std::string& question_id) const;

  const ResponseRecord* response(const std::string& question_id) const;
  const RuleSubmission* submission(const std::string& question_id) const;
  // Replacement issued for a skipped question.
  const Question* replacement_for(const std::string& question_id) const;

  const std::vector<ResponseRecord>& responses() const { return responses_; }
  const std::vector<RuleSubmission>& submissions() const { return submissions_; }
  const std::map<std::string, WorkerProfile>& workers() const { return workers_; }
  std::size_t event_count() const { return events_; }

  // Canonical view of everything above; equal states dump to equal bytes.
  Json snapshot() const;

 private:
  void refresh_completion(const std::string& worker_id);

  ConditionTable table_ = ConditionTable::standard();
  std::map<std::string, WorkerProfile> workers_;
  std::map<std::string, std::string> tokens_;       // token -> worker
  std::map<std::string, std::string> token_of_;     // worker -> token
  std::map<std::string, std::vector<std::string>> hits_by_worker_;
  std::map<std::string, IssuedHit> hits_;
  std::map<std::string, std::string> question_hit_;
  std::map<std::string, std::size_t> response_index_;
  std::map<std::string, std::size_t> submission_index_;
  std::map<std::string, Question> replacements_;
  std::vector<ResponseRecord> responses_;
  std::vector<RuleSubmission> submissions_;
  std::size_t events_ = 0;
};

// One JSON object per line, flushed after every append.
class EventLog {
 public:
  // Opens for appending; creates parent directories. `next_seq` continues
  // numbering after a replay.
  explicit EventLog(std::filesystem::path path, std::uint64_t next_seq = 1);

  const std::filesystem::path& path() const { return path_; }
  // Adds "seq" and writes the line. Throws Error(io).
  Json append(Json event);

  // Complete lines of an existing log, in order; missing file yields none.
  // An unterminated last line is the remnant of a crash: it is dropped and,
  // with `repair`, cut from the file. A malformed complete line throws
  // Error(parse) with its line number.
  static std::vector<Json> read(const std::filesystem::path& path, bool repair = true);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t seq_;
};

ExperimentState replay_events(const std::vector<Json>& events, ConditionTable table);

}  // namespace crowdguard
