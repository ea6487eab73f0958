#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cogmark {

// Elicitation tasks, in the fixed block order used by participant vectors.
enum class Task : std::uint8_t { kCtd = 0, kSf = 1, kPf = 2 };
inline constexpr std::array<Task, 3> kAllTasks = {Task::kCtd, Task::kSf, Task::kPf};

enum class Diagnosis : std::uint8_t { kHc = 0, kMci = 1, kAd = 2 };
inline constexpr int kNumClasses = 3;

inline constexpr double kMmseMin = 0.0;
inline constexpr double kMmseMax = 30.0;

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view text);

std::string_view diagnosis_name(Diagnosis d);
std::optional<Diagnosis> parse_diagnosis(std::string_view text);

// Universal part-of-speech tags.
enum class Upos : std::uint8_t {
  kAdj, kAdp, kAdv, kAux, kCconj, kDet, kIntj, kNoun, kNum,
  kPart, kPron, kPropn, kPunct, kSconj, kSym, kVerb, kX,
};

std::string_view upos_name(Upos tag);
std::optional<Upos> parse_upos(std::string_view text);

}  // namespace cogmark
