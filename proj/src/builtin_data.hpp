#pragma once

#include <string_view>

// Generated from data/ at configure time (see src/builtin_data.cpp.in).
namespace agriqa::builtin {

extern const std::string_view kStopList;
extern const std::string_view kIntentLexicon;
extern const std::string_view kPhenotypeCoefficients;

}  // namespace agriqa::builtin
