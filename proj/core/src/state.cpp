#include "crowdguard/state.hpp"

#include <algorithm>
#include <string>

namespace crowdguard {

namespace {

[[noreturn]] void inconsistent(const std::string& why) {
  throw Error(ErrorCode::parse, "event log: " + why);
}

std::string type_of(const Json& e) {
  if (!e.is_object() || !e.contains("type") || !e["type"].is_string()) {
    inconsistent("event without a type");
  }
  return e["type"].get<std::string>();
}

}  // namespace

namespace events {

Json worker_assigned(const std::string& worker_id, ConditionId condition, const std::string& token,
                     std::int64_t at) {
  return {{"type", "worker_assigned"},
          {"worker_id", worker_id},
          {"condition", to_string(condition)},
          {"token", token},
          {"at", at}};
}

Json hit_issued(const Hit& hit, std::int64_t at) {
  return {{"type", "hit_issued"}, {"hit", hit_to_json(hit)}, {"at", at}};
}

Json response_recorded(const ResponseRecord& r) {
  return {{"type", "response_recorded"}, {"response", response_to_json(r)}};
}

Json question_replaced(const std::string& hit_id, const std::string& question_id,
                       const Question& replacement, const ResponseRecord& skip) {
  return {{"type", "question_replaced"},
          {"hit_id", hit_id},
          {"question_id", question_id},
          {"replacement", question_to_json(replacement)},
          {"response", response_to_json(skip)}};
}

Json rule_submitted(const RuleSubmission& s) {
  return {{"type", "rule_submitted"}, {"submission", submission_to_json(s)}};
}

}  // namespace events

void ExperimentState::apply(const Json& e) {
  const std::string type = type_of(e);
  if (type == "worker_assigned") {
    const std::string worker_id = e.at("worker_id").get<std::string>();
    const std::string token = e.at("token").get<std::string>();
    const auto condition = parse_condition(e.at("condition").get<std::string>());
    if (!condition) inconsistent("unknown condition");
    if (workers_.count(worker_id)) inconsistent("worker '" + worker_id + "' assigned twice");
    if (tokens_.count(token)) inconsistent("token reused");
    WorkerProfile w;
    w.worker_id = worker_id;
    w.condition = *condition;
    workers_.emplace(worker_id, w);
    tokens_.emplace(token, worker_id);
    token_of_.emplace(worker_id, token);
  } else if (type == "hit_issued") {
    IssuedHit ih;
    ih.hit = hit_from_json(e.at("hit"));
    ih.issued_at = e.at("at").get<std::int64_t>();
    auto w = workers_.find(ih.hit.worker_id);
    if (w == workers_.end()) inconsistent("HIT for unknown worker");
    if (hits_.count(ih.hit.hit_id)) inconsistent("HIT '" + ih.hit.hit_id + "' issued twice");
    if (ih.hit.hit_index != w->second.hits_issued + 1) inconsistent("HIT index out of order");
    for (const auto& q : ih.hit.questions) {
      if (!question_hit_.emplace(q.question_id, ih.hit.hit_id).second) {
        inconsistent("question '" + q.question_id + "' issued twice");
      }
    }
    w->second.hits_issued += 1;
    hits_by_worker_[ih.hit.worker_id].push_back(ih.hit.hit_id);
    hits_.emplace(ih.hit.hit_id, std::move(ih));
  } else if (type == "response_recorded") {
    ResponseRecord r = response_from_json(e.at("response"));
    if (!question_hit_.count(r.question_id)) inconsistent("response to unknown question");
    if (response_index_.count(r.question_id)) inconsistent("second response to a question");
    response_index_.emplace(r.question_id, responses_.size());
    const std::string worker_id = r.worker_id;
    responses_.push_back(std::move(r));
    refresh_completion(worker_id);
  } else if (type == "question_replaced") {
    const std::string hit_id = e.at("hit_id").get<std::string>();
    const std::string question_id = e.at("question_id").get<std::string>();
    auto h = hits_.find(hit_id);
    if (h == hits_.end()) inconsistent("replacement in unknown HIT");
    auto& qs = h->second.hit.questions;
    auto it = std::find_if(qs.begin(), qs.end(),
                           [&](const Question& q) { return q.question_id == question_id; });
    if (it == qs.end()) inconsistent("replacement of a question not in the HIT");
    Question replacement = question_from_json(e.at("replacement"));
    if (!question_hit_.emplace(replacement.question_id, hit_id).second) {
      inconsistent("replacement id reused");
    }
    ResponseRecord skip = response_from_json(e.at("response"));
    if (response_index_.count(question_id)) inconsistent("skip of an answered question");
    h->second.replaced.push_back(*it);
    *it = replacement;
    replacements_.emplace(question_id, std::move(replacement));
    response_index_.emplace(question_id, responses_.size());
    responses_.push_back(std::move(skip));
  } else if (type == "rule_submitted") {
    RuleSubmission s = submission_from_json(e.at("submission"));
    if (!question_hit_.count(s.question_id)) inconsistent("submission for unknown question");
    if (submission_index_.count(s.question_id)) inconsistent("second submission for a question");
    submission_index_.emplace(s.question_id, submissions_.size());
    const std::string worker_id = s.worker_id;
    submissions_.push_back(std::move(s));
    refresh_completion(worker_id);
  } else {
    inconsistent("unknown event type '" + type + "'");
  }
  ++events_;
}

void ExperimentState::refresh_completion(const std::string& worker_id) {
  auto w = workers_.find(worker_id);
  if (w == workers_.end()) inconsistent("record for unknown worker");
  std::size_t done = 0;
  for (const auto& id : hits_by_worker_[worker_id]) {
    if (hit_complete(id)) ++done;
  }
  w->second.hits_completed = done;
}

const WorkerProfile* ExperimentState::worker(const std::string& worker_id) const {
  auto it = workers_.find(worker_id);
  return it == workers_.end() ? nullptr : &it->second;
}

const std::string* ExperimentState::worker_for_token(const std::string& token) const {
  auto it = tokens_.find(token);
  return it == tokens_.end() ? nullptr : &it->second;
}

std::string ExperimentState::token_for(const std::string& worker_id) const {
  auto it = token_of_.find(worker_id);
  return it == token_of_.end() ? std::string() : it->second;
}

const IssuedHit* ExperimentState::hit(const std::string& hit_id) const {
  auto it = hits_.find(hit_id);
  return it == hits_.end() ? nullptr : &it->second;
}

const IssuedHit* ExperimentState::open_hit(const std::string& worker_id) const {
  auto it = hits_by_worker_.find(worker_id);
  if (it == hits_by_worker_.end() || it->second.empty()) return nullptr;
  const std::string& last = it->second.back();
  return hit_complete(last) ? nullptr : hit(last);
}

bool ExperimentState::hit_complete(const std::string& hit_id) const {
  const IssuedHit* h = hit(hit_id);
  if (h == nullptr) return false;
  const bool rule_based = table_.at(h->hit.condition).kind == TaskKind::RuleBased;
  for (const auto& q : h->hit.questions) {
    if (rule_based) {
      if (q.section == Section::Task && !submission_index_.count(q.question_id)) return false;
    } else if (!response_index_.count(q.question_id)) {
      return false;
    }
  }
  return true;
}

const IssuedHit* ExperimentState::hit_of_question(const std::string& question_id) const {
  auto it = question_hit_.find(question_id);
  return it == question_hit_.end() ? nullptr : hit(it->second);
}

const ResponseRecord* ExperimentState::response(const std::string& question_id) const {
  auto it = response_index_.find(question_id);
  return it == response_index_.end() ? nullptr : &responses_[it->second];
}

const RuleSubmission* ExperimentState::submission(const std::string& question_id) const {
  auto it = submission_index_.find(question_id);
  return it == submission_index_.end() ? nullptr : &submissions_[it->second];
}

const Question* ExperimentState::replacement_for(const std::string& question_id) const {
  auto it = replacements_.find(question_id);
  return it == replacements_.end() ? nullptr : &it->second;
}

Json ExperimentState::snapshot() const {
  Json workers = Json::array();
  for (const auto& [id, w] : workers_) {
    Json j = profile_to_json(w);
    j["token"] = token_for(id);
    Json hit_ids = Json::array();
    if (auto it = hits_by_worker_.find(id); it != hits_by_worker_.end()) {
      for (const auto& h : it->second) hit_ids.push_back(h);
    }
    j["hits"] = std::move(hit_ids);
    workers.push_back(std::move(j));
  }
  Json hits = Json::array();
  for (const auto& [id, h] : hits_) {
    Json replaced = Json::array();
    for (const auto& q : h.replaced) replaced.push_back(question_to_json(q));
    hits.push_back({{"hit", hit_to_json(h.hit)},
                    {"replaced", std::move(replaced)},
                    {"issued_at", h.issued_at},
                    {"complete", hit_complete(id)}});
  }
  Json responses = Json::array();
  for (const auto& r : responses_) responses.push_back(response_to_json(r));
  Json submissions = Json::array();
  for (const auto& s : submissions_) submissions.push_back(submission_to_json(s));
  return {{"workers", std::move(workers)},
          {"hits", std::move(hits)},
          {"responses", std::move(responses)},
          {"submissions", std::move(submissions)},
          {"events", events_}};
}

// --- EventLog ----------------------------------------------------------------

EventLog::EventLog(std::filesystem::path path, std::uint64_t next_seq)
    : path_(std::move(path)), seq_(next_seq) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::io, "cannot open event log '" + path_.string() + "'");
}

Json EventLog::append(Json event) {
  event["seq"] = seq_;
  out_ << event.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::io, "write to event log '" + path_.string() + "' failed");
  ++seq_;
  return event;
}

std::vector<Json> EventLog::read(const std::filesystem::path& path, bool repair) {
  std::vector<Json> out;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return out;
  std::string content;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read event log '" + path.string() + "'");
    content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const std::size_t end = content.rfind('\n');
  const std::size_t complete = end == std::string::npos ? 0 : end + 1;
  if (complete < content.size() && repair) {
    std::filesystem::resize_file(path, complete);
  }
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < complete) {
    const std::size_t nl = content.find('\n', pos);
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::parse, "malformed event", line_no);
    }
    out.push_back(std::move(j));
  }
  return out;
}

ExperimentState replay_events(const std::vector<Json>& events, ConditionTable table) {
  ExperimentState state(std::move(table));
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      state.apply(events[i]);
    } catch (const Json::exception& ex) {
      throw Error(ErrorCode::parse, std::string("event log: ") + ex.what(), i + 1);
    }
  }
  return state;
}

}  // namespace crowdguard
