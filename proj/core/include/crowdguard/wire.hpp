#pragma once

// JSON encodings shared by the HTTP API, the event log and the CLI. Field
// names are documented in docs/formats.md.

#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdguard/builder.hpp"
#include "crowdguard/orchestration.hpp"

namespace crowdguard {

using Json = nlohmann::json;

// BuilderAction, e.g. {"kind":"choose_choicebox","position":"outer","op":"OR"}.
Json action_to_json(const BuilderAction& a);
// Throws Error(parse).
BuilderAction action_from_json(const Json& j);
Json actions_to_json(std::span<const BuilderAction> actions);
// On failure the Error message names the offending index, also written to
// `failed_index`.
std::vector<BuilderAction> actions_from_json(const Json& j, std::size_t* failed_index = nullptr);

Json literal_to_json(const Literal& lit);
Literal literal_from_json(const Json& j);

// Display tokens with the placed-token index each one edits (null for the
// derived tail).
Json tokens_to_json(const BuilderState& b, const PredicateRegistry& registry);

// Full encodings, used by the event log.
Json question_to_json(const Question& q);
Question question_from_json(const Json& j);
Json hit_to_json(const Hit& h);
Hit hit_from_json(const Json& j);
Json response_to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const Json& j);
Json submission_to_json(const RuleSubmission& s);
RuleSubmission submission_from_json(const Json& j);
Json profile_to_json(const WorkerProfile& w);
Json help_to_json(const HelpFeedback& h);

// responses.jsonl and rules.jsonl: one record per line. Readers throw
// Error(parse) with the line number.
void write_responses(std::ostream& out, std::span<const ResponseRecord> rs);
std::vector<ResponseRecord> read_responses(std::istream& in);
void write_submissions(std::ostream& out, std::span<const RuleSubmission> ss);
std::vector<RuleSubmission> read_submissions(std::istream& in);

}  // namespace crowdguard
