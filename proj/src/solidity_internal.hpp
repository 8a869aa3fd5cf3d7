#pragma once

#include <string>
#include <vector>

namespace sentinel::detail {

struct Token {
    std::string text;
    int line = 0;  // 1-based
};

/// Replaces comments and string literals with spaces, preserving line
/// structure. Optionally reports, per line (1-based), whether the line holds
/// any code and whether it holds any comment text.
std::string blank_noncode(const std::string& source,
                          std::vector<bool>* has_code = nullptr,
                          std::vector<bool>* has_comment = nullptr);

std::vector<Token> tokenize(const std::string& blanked);

bool is_elementary_type(const std::string& tok);
bool is_keyword(const std::string& tok);
bool is_builtin_call(const std::string& tok);

/// Index of the matching close for the open bracket at `open_index`, or -1.
int match_bracket(const std::vector<Token>& toks, int open_index);

}  // namespace sentinel::detail
