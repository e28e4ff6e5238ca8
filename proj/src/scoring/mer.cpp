// Copyright 2026 The cswhisper Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cswhisper/scoring/mer.hpp"

#include <stdexcept>

#include "cswhisper/common/error.hpp"

namespace csw::scoring {

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& other) {
  n_ref += other.n_ref;
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  return *this;
}

namespace {

std::optional<double> rate(const ErrorCounts& c) {
  if (c.n_ref == 0) return std::nullopt;
  return 100.0 * static_cast<double>(c.errors()) / static_cast<double>(c.n_ref);
}

std::size_t cls(TokenClass k) { return static_cast<std::size_t>(k); }

}  // namespace

MerReport compute_mer(std::span<const AlignmentStep> steps, std::size_t n_ref) {
  MerReport r;
  r.utterances = 1;
  for (const auto& s : steps) {
    switch (s.op) {
      case EditOp::kMatch:
        ++r.per_class[cls(s.ref->klass)].n_ref;
        break;
      case EditOp::kSubstitute:
        ++r.per_class[cls(s.ref->klass)].n_ref;
        ++r.per_class[cls(s.ref->klass)].substitutions;
        break;
      case EditOp::kDelete:
        ++r.per_class[cls(s.ref->klass)].n_ref;
        ++r.per_class[cls(s.ref->klass)].deletions;
        break;
      case EditOp::kInsert:
        ++r.per_class[cls(s.hyp->klass)].insertions;
        break;
    }
  }
  for (const auto& c : r.per_class) r.counts += c;
  if (r.counts.n_ref != n_ref)
    throw std::invalid_argument("compute_mer: n_ref does not match the alignment");
  r.mer = rate(r.counts);
  return r;
}

MerReport aggregate(std::span<const MerReport> reports) {
  MerReport total;
  for (const auto& r : reports) {
    total.utterances += r.utterances;
    total.counts += r.counts;
    for (std::size_t k = 0; k < total.per_class.size(); ++k) total.per_class[k] += r.per_class[k];
  }
  if (total.counts.n_ref == 0)
    throw ConfigError("cannot aggregate MER: zero reference tokens in total");
  total.mer = rate(total.counts);
  return total;
}

ScoredUtterance score_pair(const TextPair& pair) {
  const auto ref = mixed_tokenize(normalize_text(pair.reference));
  const auto hyp = mixed_tokenize(normalize_text(pair.hypothesis));
  ScoredUtterance out;
  out.steps = align(ref, hyp);
  out.report = compute_mer(out.steps, ref.size());
  out.report.utt_id = pair.utt_id;
  return out;
}

namespace serial {
std::vector<ScoredUtterance> score_pairs(std::span<const TextPair> pairs) {
  std::vector<ScoredUtterance> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = score_pair(pairs[i]);
  return out;
}
}  // namespace serial

std::vector<ScoredUtterance> score_pairs(std::span<const TextPair> pairs) {
  std::vector<ScoredUtterance> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_pair(pairs[i]);
  return out;
}

nlohmann::ordered_json to_json(const MerReport& report) {
  auto counts = [](const ErrorCounts& c) {
    return nlohmann::ordered_json{{"n_ref", c.n_ref},
                                  {"substitutions", c.substitutions},
                                  {"deletions", c.deletions},
                                  {"insertions", c.insertions}};
  };
  nlohmann::ordered_json j;
  if (!report.utt_id.empty()) j["utt_id"] = report.utt_id;
  j["utterances"] = report.utterances;
  j["mer"] = report.mer ? nlohmann::ordered_json(*report.mer) : nlohmann::ordered_json(nullptr);
  j["counts"] = counts(report.counts);
  j["per_class"] = {{"han", counts(report.per_class[cls(TokenClass::kHan)])},
                    {"latin", counts(report.per_class[cls(TokenClass::kLatin)])},
                    {"other", counts(report.per_class[cls(TokenClass::kOther)])}};
  return j;
}

std::string alignment_dump(const ScoredUtterance& scored) {
  std::string ref_line = "REF:";
  std::string hyp_line = "HYP:";
  std::string op_line = "OP: ";
  for (const auto& s : scored.steps) {
    ref_line += ' ';
    ref_line += s.ref ? s.ref->surface : "*";
    hyp_line += ' ';
    hyp_line += s.hyp ? s.hyp->surface : "*";
    op_line += ' ';
    op_line += to_string(s.op);
  }
  return scored.report.utt_id + "\n" + ref_line + "\n" + hyp_line + "\n" + op_line + "\n";
}

}  // namespace csw::scoring
