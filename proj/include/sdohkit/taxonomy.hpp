#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "sdohkit/error.hpp"

namespace sdohkit {

// The five SDOH topics, each with three subtopics, that drive factor
// summarization and rubric rating. Feature columns are named
// "<Topic> - <Subtopic>" with this exact separator.

inline constexpr std::size_t kTopicCount = 5;
inline constexpr std::size_t kSubtopicsPerTopic = 3;
inline constexpr std::size_t kSubtopicCount = kTopicCount * kSubtopicsPerTopic;

struct SubtopicDef {
    std::string_view topic;
    std::string_view subtopic;
    std::array<std::string_view, 3> keywords;  // retrieval hints
    std::array<std::string_view, 5> scale;     // level descriptions 1..5
};

namespace taxonomy_detail {

inline constexpr std::array<SubtopicDef, kSubtopicCount> kSubtopics = {{
    {"Socioeconomic Status",
     "Income Level",
     {"income", "savings", "retirement"},
     {"Extreme financial hardship; below the poverty line; unable to meet basic needs (food, shelter).",
      "Low income; struggles with consistent basic needs but has some access to social support or assistance.",
      "Moderate income; meets basic needs but has no financial flexibility.",
      "Stable income; meets needs and has moderate financial security.",
      "High income; strong financial security with savings/investments."}},
    {"Socioeconomic Status",
     "Housing",
     {"housing", "home", "neighborhood"},
     {"Homeless or living in unstable, temporary housing.",
      "Inconsistent housing; risk of eviction or unsafe conditions.",
      "Stable housing but low-quality or unsafe environment.",
      "Stable, safe housing; moderate quality.",
      "High-quality, stable housing in a safe neighborhood."}},
    {"Socioeconomic Status",
     "Financial Stress",
     {"financial", "bills", "expenses"},
     {"Severe financial stress; constant worry about affording essentials.",
      "Frequent financial stress; periodic struggle meeting expenses.",
      "Moderate financial stress; occasional worries but generally manageable.",
      "Minimal financial stress; able to pay bills comfortably most of the time.",
      "No financial stress at all; feels fully secure financially."}},
    {"Diet",
     "Diet Type",
     {"diet", "meals", "vegetables"},
     {"Diet dominated by unhealthy, processed foods.",
      "Primarily unhealthy with occasional healthy items.",
      "Balanced mix but with some indulgences.",
      "Mostly healthy with rare unhealthy moments.",
      "Consistently healthy, nutrient-rich diet."}},
    {"Diet",
     "Food Preferences",
     {"food", "preferences", "sweets"},
     {"Strong preference for high-calorie, low-nutrient foods.",
      "Limited interest in healthy foods.",
      "Moderately open to healthy options.",
      "Prefer healthier foods, tries to avoid junk.",
      "Actively seeks out nutrient-rich, healthy foods."}},
    {"Diet",
     "Dietary Restrictions",
     {"restrictions", "carbs", "portions"},
     {"Ignores recommended restrictions entirely.",
      "Very quick to lapse or cheat on them.",
      "Moderate adherence to dietary restrictions, but not perfectly consistent.",
      "Generally follows restrictions with occasional slips.",
      "Fully compliant; no major slips."}},
    {"Social Support",
     "Family Support",
     {"family", "spouse", "children"},
     {"No family support; may feel isolated.",
      "Minimal or inconsistent family assistance.",
      "Some reliable help, but not comprehensive.",
      "Reliable and significant family support.",
      "Very strong or exceptional family network."}},
    {"Social Support",
     "Friends",
     {"friends", "friendship", "companions"},
     {"No friends; isolated socially.",
      "Minimal friend support; rare interactions.",
      "Moderate friend support; some emotional or practical help.",
      "Strong friend network; consistent help.",
      "Exceptional friend support; highly dependable and engaged."}},
    {"Social Support",
     "Social Networks",
     {"community", "club", "volunteering"},
     {"Completely disconnected; no broader community ties.",
      "Limited social involvement; rare group activities.",
      "Some involvement with local community or social groups.",
      "Active in community or group settings regularly.",
      "Exceptionally integrated into multiple networks."}},
    {"Health Services",
     "Healthcare Utilization",
     {"appointments", "checkups", "clinic"},
     {"No regular healthcare visits; major gaps in care.",
      "Rare or only emergency visits.",
      "Irregular but some routine check-ups.",
      "Consistent appointments and fairly comprehensive care.",
      "Excellent utilization; very proactive approach."}},
    {"Health Services",
     "Satisfaction with Services",
     {"satisfied", "doctors", "nurses"},
     {"Deeply dissatisfied; ongoing issues.",
      "Mostly dissatisfied; some minor positive points.",
      "Neutral or mixed feelings; basics met.",
      "Generally satisfied; no major issues.",
      "Extremely satisfied; fully trusts providers."}},
    {"Health Services",
     "Barriers to Care",
     {"barriers", "transportation", "copay"},
     {"Intense barriers (cost, transport, discrimination).",
      "Multiple major barriers limiting access.",
      "Some barriers but partially manageable.",
      "Few barriers; mostly minor.",
      "No barriers to care."}},
    {"Information on Diabetes Management",
     "Knowledge Level",
     {"knowledge", "learned", "education"},
     {"No knowledge of diabetes management.",
      "Very little awareness of key concepts.",
      "Moderate knowledge; some gaps remain.",
      "Good knowledge base; fairly solid understanding.",
      "Excellent knowledge, possibly well-educated about diabetes."}},
    {"Information on Diabetes Management",
     "Self-Care Practices",
     {"exercise", "monitoring", "routine"},
     {"No self-care for diabetes management.",
      "Rare or minimal attempts at self-management.",
      "Some consistent efforts but not comprehensive.",
      "Regular, reliable self-care habits.",
      "Exemplary self-care; very proactive and thorough."}},
    {"Information on Diabetes Management",
     "Medication Adherence",
     {"medication", "pills", "doses"},
     {"Never follows medication schedule.",
      "Very poor adherence; frequent lapses.",
      "Moderate adherence; occasional misses.",
      "Strong adherence; minor lapses only.",
      "Perfect adherence; no missed doses."}},
}};

}  // namespace taxonomy_detail

inline const std::array<SubtopicDef, kSubtopicCount>& subtopics() {
    return taxonomy_detail::kSubtopics;
}

inline std::string feature_name(std::size_t subtopic_index) {
    const auto& d = taxonomy_detail::kSubtopics.at(subtopic_index);
    return std::string(d.topic) + " - " + std::string(d.subtopic);
}

inline std::vector<std::string> topic_names() {
    std::vector<std::string> out;
    for (const auto& d : taxonomy_detail::kSubtopics) {
        const std::string t(d.topic);
        if (out.empty() || out.back() != t) out.push_back(t);
    }
    return out;
}

inline std::vector<std::size_t> subtopic_indices_for_topic(std::string_view topic) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kSubtopicCount; ++i)
        if (taxonomy_detail::kSubtopics[i].topic == topic) out.push_back(i);
    return out;
}

inline std::size_t subtopic_index(std::string_view topic, std::string_view subtopic) {
    for (std::size_t i = 0; i < kSubtopicCount; ++i) {
        const auto& d = taxonomy_detail::kSubtopics[i];
        if (d.topic == topic && d.subtopic == subtopic) return i;
    }
    throw Error(ErrorKind::Input, "unknown subtopic " + std::string(topic) + " - " +
                                      std::string(subtopic));
}

// The full scale block bound into the rating prompt: levels 1..5 plus the
// "not mentioned" sentinel rule.
inline std::string scale_text(std::size_t subtopic_index) {
    const auto& d = taxonomy_detail::kSubtopics.at(subtopic_index);
    std::string out = "\n";
    for (std::size_t level = 1; level <= 5; ++level) {
        out += std::to_string(level) + ": " + std::string(d.scale[level - 1]) + "\n";
    }
    out += "-1: Not mentioned or irrelevant in the interview.\n";
    return out;
}

}  // namespace sdohkit
