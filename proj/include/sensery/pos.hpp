#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensery/text.hpp"

namespace sensery {

// Rule-based POS guesser: closed-class lexicon, then suffix rules, default
// NN. Used only when the input carries no POS column.
std::string guess_pos(std::string_view surface);

// Copy of `sentence` with every missing POS filled in.
TaggedSentence with_pos(const TaggedSentence& sentence);
std::vector<Token> with_pos(std::span<const Token> tokens);

}  // namespace sensery
