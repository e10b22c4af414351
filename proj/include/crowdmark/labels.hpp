#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace crowdmark {

/// Damage severity of a volunteer mark. Class boundaries by damaged share of
/// the structure: Minor < 20%, Significant 20-60%, Catastrophic > 60%.
enum class Severity : std::uint8_t { Minor = 1, Significant = 2, Catastrophic = 3 };

/// A volunteer's answer for one object. The numeric values double as class
/// indices (Empty = 0 ... Catastrophic = 3) and preserve the severity order.
enum class ResponseLabel : std::uint8_t { Empty = 0, Minor = 1, Significant = 2, Catastrophic = 3 };

inline constexpr std::size_t kNumClasses = 4;

inline constexpr std::array<ResponseLabel, kNumClasses> kAllLabels{
    ResponseLabel::Empty, ResponseLabel::Minor, ResponseLabel::Significant, ResponseLabel::Catastrophic};

[[nodiscard]] constexpr std::size_t index_of(ResponseLabel l) noexcept { return static_cast<std::size_t>(l); }
[[nodiscard]] constexpr ResponseLabel label_at(std::size_t i) noexcept { return static_cast<ResponseLabel>(i); }
[[nodiscard]] constexpr ResponseLabel to_response(Severity s) noexcept { return static_cast<ResponseLabel>(s); }

/// Lower-case name: "empty", "minor", "significant", "catastrophic".
[[nodiscard]] std::string_view to_string(ResponseLabel l) noexcept;
[[nodiscard]] std::string_view to_string(Severity s) noexcept;

[[nodiscard]] std::optional<ResponseLabel> parse_response_label(std::string_view s) noexcept;
[[nodiscard]] std::optional<Severity> parse_severity(std::string_view s) noexcept;

/// Maps the damaged share of a building, in [0, 1], to its class; 0 is Empty.
[[nodiscard]] ResponseLabel label_from_damage_fraction(double fraction);

} // namespace crowdmark
