#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dip {

enum class Origin { dip, rps, beam };

std::string to_string(Origin origin);
Origin origin_from_string(std::string_view s);

/// One generated precondition clause. `text` keeps the <pre> markers the
/// model emitted; metrics strip them.
struct Candidate {
  std::string trigger;
  std::vector<std::string> text;
  double lm_logprob = 0.0;
  std::optional<double> rank_score;
  std::optional<std::vector<double>> embedding;
  Origin origin = Origin::dip;

  /// Generation never produced a usable clause (e.g. RPS without <pre>).
  bool malformed = false;
  /// max_len was reached before <eos>.
  bool truncated = false;
  /// The supplied/extracted trigger occurs among the clause tokens.
  bool trigger_in_text = false;
  /// Survived post-processing into the final top-k output.
  bool kept = false;
};

}  // namespace dip
