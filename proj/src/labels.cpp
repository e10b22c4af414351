#include "crowdmark/labels.hpp"

#include "crowdmark/errors.hpp"

namespace crowdmark {

std::string_view to_string(ResponseLabel l) noexcept {
    switch (l) {
    case ResponseLabel::Empty: return "empty";
    case ResponseLabel::Minor: return "minor";
    case ResponseLabel::Significant: return "significant";
    case ResponseLabel::Catastrophic: return "catastrophic";
    }
    return "?";
}

std::string_view to_string(Severity s) noexcept { return to_string(to_response(s)); }

std::optional<ResponseLabel> parse_response_label(std::string_view s) noexcept {
    for (ResponseLabel l : kAllLabels) {
        if (s == to_string(l)) {
            return l;
        }
    }
    return std::nullopt;
}

std::optional<Severity> parse_severity(std::string_view s) noexcept {
    const auto l = parse_response_label(s);
    if (!l || *l == ResponseLabel::Empty) {
        return std::nullopt;
    }
    return static_cast<Severity>(*l);
}

ResponseLabel label_from_damage_fraction(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw InvalidParameter("damage fraction must lie in [0,1]");
    }
    if (fraction == 0.0) {
        return ResponseLabel::Empty;
    }
    if (fraction < 0.2) {
        return ResponseLabel::Minor;
    }
    if (fraction <= 0.6) {
        return ResponseLabel::Significant;
    }
    return ResponseLabel::Catastrophic;
}

} // namespace crowdmark
