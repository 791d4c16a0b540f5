#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sensery/embeddings.hpp"
#include "sensery/patterns.hpp"

namespace sensery::fixtures {

// 2-D word vectors at known angles; "z" words are out of vocabulary.
inline EmbeddingTable planar_table() {
  std::ostringstream text;
  const auto row = [&](const std::string& w, double deg) {
    const double r = deg * 3.14159265358979323846 / 180.0;
    text << w << ' ' << std::cos(r) << ' ' << std::sin(r) << '\n';
  };
  row("bell", 0);
  row("chime", 10);
  row("drum", 40);
  row("gong", 5);
  row("horn", 60);
  row("siren", 100);
  row("thunder", 170);
  row("hush", 250);
  row("echo", 300);
  row("whistle", 20);
  std::istringstream in(text.str());
  return parse_embeddings(in, "planar");
}

inline std::vector<LabeledPhrase> planar_crowd() {
  return {{{"bell"}, Sense::Audible, Provenance::Crowd},
          {{"drum"}, Sense::Audible, Provenance::Crowd},
          {{"echo"}, Sense::Audible, Provenance::Crowd}};
}

inline std::vector<LabeledPhrase> planar_pattern() {
  return {{{"chime"}, Sense::Audible},           {{"horn"}, Sense::Audible},
          {{"siren"}, Sense::Audible},           {{"thunder"}, Sense::Audible},
          {{"hush"}, Sense::Audible},            {{"gong", "whistle"}, Sense::Audible},
          {{"zzz", "zzzz"}, Sense::Audible},     {{"bell"}, Sense::Audible}};
}

}  // namespace sensery::fixtures
