#pragma once
//
// File formats: JSON for configs and environments, JSONL for per-trial and
// per-participant data, CSV for tables. Doubles are written in shortest
// round-trip form so reruns are byte-identical and re-parsing is exact.
//

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "metamdp/bms.hpp"
#include "metamdp/env.hpp"
#include "metamdp/features.hpp"
#include "metamdp/fit.hpp"
#include "metamdp/learner.hpp"
#include "metamdp/simulate.hpp"

namespace metamdp {

using nlohmann::json;

std::string format_double(double x);

// {"nodes": [{"id": int, "parent": int|null}], "priors": {"<id>": [[value, prob], ...]},
//  "click_cost": number}
EnvConfig env_from_json(const json& j);
json env_to_json(const EnvConfig& env);

// {"<id>": value}
GroundTruth truth_from_json(const json& j, const EnvConfig& env);
json truth_to_json(const GroundTruth& g);

// {"features": [names...], "scales": [numbers...]}; scales optional (defaults).
FeatureSetConfig features_from_json(const json& j, const EnvConfig& env);
json features_to_json(const FeatureSetConfig& cfg);

VariantSpec variant_from_json(const json& j);
json variant_to_json(const VariantSpec& v);

// w_init may be an array of F numbers, or a number s meaning s * direction.
HyperParams hyperparams_from_json(const json& j, const FeatureSetConfig& features,
                                  const std::vector<double>& direction);
json hyperparams_to_json(const HyperParams& hp);

// One JSONL line: {"id": str, "trials": [{"truth": {...}, "clicks": [...], "terminated": true}]}
ParticipantData participant_from_json(const json& j, const EnvConfig& env);
json participant_to_json(const ParticipantData& p);

json trial_record_to_json(const TrialRecord& r);
TrialRecord trial_record_from_json(const json& j, const EnvConfig& env);

// One ParticipantData per agent, id = agent index.
std::vector<ParticipantData> participants_from_records(std::span<const TrialRecord> records);

// Fit table: id,variant,alpha,gamma,tau,pr_weight,se_value,ll,bic,n_obs
inline constexpr const char* kFitCsvHeader = "id,variant,alpha,gamma,tau,pr_weight,se_value,ll,bic,n_obs";
std::string fit_csv_row(const std::string& id, const FitResult& fit);

struct FitRow {
  std::string id;
  VariantSpec variant;
  double alpha = 0, gamma = 0, tau = 0, pr_weight = 0, se_value = 0;
  double ll = 0, bic = 0;
  int n_obs = 0;
};
std::vector<FitRow> parse_fit_csv(const std::string& text);

// Partition name -> family name -> member variant names. The default holds the
// PR, TD and SE splits of the eight variants.
using FamilyMap = std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::vector<std::string>>>>>;
FamilyMap default_family_map();
FamilyMap family_map_from_json(const json& j);

// Evidence matrix (-BIC/2) for one partition; participants in first-seen order.
// Throws kMissingFit naming every absent (participant, variant) pair.
EvidenceMatrix evidence_from_fits(const std::vector<FitRow>& rows,
                                  const std::vector<std::pair<std::string, std::vector<std::string>>>& families,
                                  std::vector<std::string>* participant_ids = nullptr);

json bms_result_to_json(const BmsResult& r, const EvidenceMatrix& e);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace metamdp
