#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sdohkit/corpus.hpp"
#include "sdohkit/rng.hpp"
#include "sdohkit/taxonomy.hpp"

namespace sdohkit::synth {

// Synthetic interview corpus, calibrated to the published cohort statistics,
// standing in for real patient data. Each transcript is assembled from
// sentence templates that encode a planted 1-5 level per subtopic; the
// planted levels are written to a sidecar file, never into the transcript.

struct SyntheticConfig {
    std::size_t n_patients = 65;
    double a1c_mean = 6.83;
    double a1c_sd = 1.05;
    double a1c_min = 4.5;
    double a1c_max = 10.3;
    std::uint64_t seed = 1;
    // Keyed by feature column name ("Glucose", "Diet - Diet Type", ...);
    // coefficients apply to standardized features.
    std::map<std::string, double> planted_effect_sizes;
    double subtopic_absence_rate = 0.17;
    double lab_missing_rate = 0.05;
    double a1c_mention_rate = 1.0;
    std::size_t min_words = 240;
    std::size_t extra_words_cap = 160;

    void validate() const {
        if (n_patients < 2) throw Error(ErrorKind::Config, "n_patients must be >= 2");
        if (!(a1c_min < a1c_max)) throw Error(ErrorKind::Config, "a1c range must be increasing");
        if (!(a1c_sd > 0)) throw Error(ErrorKind::Config, "a1c_sd must be positive");
        for (const double p : {subtopic_absence_rate, lab_missing_rate, a1c_mention_rate})
            if (p < 0.0 || p > 1.0) throw Error(ErrorKind::Config, "rates must lie in [0,1]");
        for (const auto& [name, _] : planted_effect_sizes) {
            bool known = false;
            for (std::size_t i = 0; i < kSubtopicCount; ++i)
                if (feature_name(i) == name) known = true;
            for (const auto& lab : corpus::LabPanel::column_names())
                if (lab == name) known = true;
            if (!known)
                throw Error(ErrorKind::Config, "unknown feature in planted_effect_sizes: " + name);
        }
    }
};

// Planted level per (patient, subtopic); -1 marks an absent subtopic.
using LevelGrid = std::vector<std::array<int, kSubtopicCount>>;

struct SyntheticCorpus {
    std::vector<corpus::PatientRecord> records;
    LevelGrid levels;
};

// ---------------------------------------------------------------------------
// Sentence banks. Two interchangeable phrasings per (subtopic, level); each
// carries the subtopic's retrieval keywords so embedding search can find it.
// Bank sentences never mention A1C and avoid bare numerals.
// ---------------------------------------------------------------------------

namespace bank {

using LevelVariants = std::array<std::string_view, 2>;
using SubtopicBank = std::array<LevelVariants, 5>;

inline constexpr std::array<SubtopicBank, kSubtopicCount> kSentences = {{
    // Socioeconomic Status - Income Level
    {{{"My income is gone and there are no savings left, so even food and shelter are uncertain.",
       "Without any income or savings I cannot cover the basics anymore, not even groceries."},
      {"My income barely covers basic needs and the little savings we had are spent, though a local program helps.",
       "We scrape by on a very low income, and my sister helps when the savings run out."},
      {"My retirement income covers the basic needs but leaves no savings or flexibility at all.",
       "The income from retirement meets our needs exactly, with nothing left over for savings."},
      {"My retirement income is stable and we keep a modest cushion of savings for surprises.",
       "We live comfortably on a steady income and have some savings put aside."},
      {"Between the pension and investments my income is high, and our savings give us full security.",
       "Our income is more than we need, with strong savings and investments for retirement."}}},
    // Socioeconomic Status - Housing
    {{{"I have no stable housing right now and move between shelters and a cousin's couch.",
       "My housing situation is temporary at best; some weeks I do not know where home will be."},
      {"Our housing is shaky because the landlord keeps threatening eviction and the home has unsafe wiring.",
       "The housing we rent could fall through any month, and the neighborhood feels unsafe at night."},
      {"My housing is stable but the home is run down and the neighborhood has real problems.",
       "We keep the same housing year to year, though the home needs repairs we cannot make."},
      {"Our housing is stable and safe, a modest home in a decent neighborhood.",
       "The home we own is solid and the housing costs are manageable in our quiet neighborhood."},
      {"We live in a lovely, stable home in a very safe neighborhood with everything nearby.",
       "Our housing could not be better, a high-quality home in a safe and friendly neighborhood."}}},
    // Socioeconomic Status - Financial Stress
    {{{"The financial pressure never stops; I worry about bills and essentials every single day.",
       "Every week brings financial panic over the bills, and affording essentials keeps me up at night."},
      {"Financial stress comes around often, and some months the bills and expenses are a real struggle.",
       "We frequently fall behind on expenses, and the financial strain over bills wears on me."},
      {"There is moderate financial stress; occasional worries about expenses, but we generally manage the bills.",
       "Money gets tight sometimes and I worry about expenses, but the financial side is mostly manageable."},
      {"Financial stress is minimal for us; the bills get paid comfortably almost every month.",
       "We rarely think twice about bills or expenses; the financial side is comfortable."},
      {"I feel no financial stress at all; bills and expenses are never a concern for us.",
       "Financially we are fully secure, with zero worry about bills or unexpected expenses."}}},
    // Diet - Diet Type
    {{{"My diet is mostly fried takeout and packaged snacks; proper meals with vegetables almost never happen.",
       "Most meals in my diet come from drive-through windows or boxes, heavy on processed food and never vegetables."},
      {"My diet leans unhealthy, lots of heavy meals, though I do add vegetables once in a while.",
       "The meals I cook are mostly rich and starchy, with only an occasional healthy diet day with vegetables."},
      {"My diet is a balanced mix; most meals include vegetables, but I still indulge in rich dishes.",
       "I keep the diet reasonably balanced with vegetables in many meals, allowing some indulgences."},
      {"My diet is mostly healthy, vegetables with most meals, with just a rare unhealthy moment.",
       "I cook wholesome meals with plenty of vegetables, and my diet slips only rarely."},
      {"My diet is consistently healthy, vegetables and whole grains at nearly every meal.",
       "Every meal in my diet is built around vegetables, lean protein, and whole foods."}}},
    // Diet - Food Preferences
    {{{"Given the choice I always reach for greasy, sugary food; sweets are my favorite thing.",
       "My food preferences run straight to fried food and sweets, the richer the better."},
      {"Healthy food holds little interest for me; my preferences lean toward comfort food and sweets.",
       "I will eat healthy food if someone serves it, but my preferences are for heavy dishes and sweets."},
      {"My food preferences are middling; I am open to healthy options but still enjoy sweets.",
       "I try healthier food when offered, though my preferences still include regular sweets."},
      {"I prefer healthier food these days and try to avoid junk and sweets.",
       "My food preferences lean healthy now; I pass on most junk food and keep sweets occasional."},
      {"I actively seek out nutrient-rich food and have genuinely lost my taste for sweets.",
       "My food preferences are firmly for fresh, healthy food; sweets do not tempt me anymore."}}},
    // Diet - Dietary Restrictions
    {{{"I ignore the dietary restrictions completely; I eat whatever carbs I like in any portions.",
       "The restrictions the dietitian gave me go ignored; I never watch carbs or portions."},
      {"I know my restrictions on carbs but cheat on them quickly, especially with large portions at parties.",
       "The dietary restrictions last a few days before I lapse back into old portions and carbs."},
      {"I follow the dietary restrictions moderately well, counting carbs most days but not consistently.",
       "My adherence to the restrictions is middling; I watch portions often but slip on carbs."},
      {"I generally follow my dietary restrictions, keeping carbs and portions in line with occasional slips.",
       "The restrictions guide most of my choices; portions stay controlled with only rare slips on carbs."},
      {"I am fully compliant with every dietary restriction, strict on carbs and exact about portions.",
       "My restrictions are followed to the letter; carbs counted and portions measured without slips."}}},
    // Social Support - Family Support
    {{{"I have no family support at all; my children never call and I feel very isolated.",
       "There is no family left to lean on, and without a spouse or children nearby I manage alone."},
      {"Family support is minimal; my children visit maybe twice a year and help is inconsistent.",
       "My family helps only now and then; my spouse passed and the children live far away."},
      {"My family gives some reliable help; one of my children checks in weekly, though not for everything.",
       "The family support is partial; my spouse helps with some things and the children with others."},
      {"My family is a reliable support; my spouse and children step in whenever I need them.",
       "Family support is significant here; the children drive me to appointments and my spouse cooks."},
      {"My family network is exceptional; spouse, children, and grandchildren all pitch in constantly.",
       "The family around me is very strong; children nearby, a devoted spouse, everyone involved."}}},
    // Social Support - Friends
    {{{"I have no friends to speak of anymore; socially I am completely on my own.",
       "Friends have all drifted away or passed, and I have no companions left."},
      {"My friends are few and we rarely talk; friendship at this age feels thin.",
       "Friend support is minimal; a rare phone call from old companions is about it."},
      {"I have moderate support from friends; a couple of companions help out or listen when needed.",
       "A few friends provide some emotional help, and one companion drives me places sometimes."},
      {"My friends are a strong network; companions from church and the old job help consistently.",
       "Friendship is a steady presence; my friends check on me and we help each other weekly."},
      {"My friends are exceptional, highly dependable companions who show up for everything.",
       "The friendship circle around me is deeply engaged; friends visit, call, and organize help."}}},
    // Social Support - Social Networks
    {{{"I am completely disconnected from the community; no clubs, no groups, no volunteering.",
       "There are no community ties left; I stopped the club and volunteering years ago."},
      {"My community involvement is limited; I attend a group event perhaps twice a year.",
       "I rarely join community activities; the club meets without me most months."},
      {"I have some involvement in the community, a monthly club meeting and occasional volunteering.",
       "The community sees me sometimes; I attend the senior club and help at occasional events."},
      {"I am active in the community, regular at the club and volunteering most weeks.",
       "Community groups keep me busy; the walking club and volunteering fill my calendar."},
      {"I am woven into multiple community networks, from volunteering to the garden club to church committees.",
       "My community life is exceptionally full; several clubs, steady volunteering, and neighborhood groups."}}},
    // Health Services - Healthcare Utilization
    {{{"I never go to the clinic; no appointments, no checkups, not for years.",
       "Healthcare visits just do not happen for me; I have skipped every appointment and checkup."},
      {"I only see a doctor in emergencies; routine appointments and checkups get skipped.",
       "The clinic sees me only when something breaks; scheduled checkups never happen."},
      {"My appointments are irregular; I make some checkups at the clinic but miss others.",
       "I get to the clinic for checkups now and then, though appointments slip through."},
      {"I keep my appointments consistently; regular checkups at the clinic cover most of my care.",
       "The clinic knows me well; appointments and checkups happen on schedule nearly always."},
      {"I am very proactive with healthcare; every appointment, every checkup, plus preventive visits at the clinic.",
       "My utilization is excellent; I schedule checkups early and never miss a clinic appointment."}}},
    // Health Services - Satisfaction with Services
    {{{"I am deeply dissatisfied with my care; the doctors dismiss me and problems never get resolved.",
       "The service has been awful; I do not feel heard by the doctors or the nurses."},
      {"Mostly I am dissatisfied with the doctors, though one of the nurses is kind.",
       "My satisfaction with the care is low; the doctors rush, even if the front desk is polite."},
      {"My feelings about the care are mixed; the doctors cover the basics and the nurses are fine.",
       "I am neither satisfied nor upset; doctors and nurses do what is needed, nothing more."},
      {"Overall I am satisfied with my care; the doctors listen and the nurses follow up.",
       "The doctors and nurses have been good to me; I am generally satisfied with the services."},
      {"I am extremely satisfied and fully trust my doctors; the nurses treat me like family.",
       "My satisfaction could not be higher; the doctors are thorough and the nurses are wonderful."}}},
    // Health Services - Barriers to Care
    {{{"The barriers to care are intense; no transportation, impossible copay amounts, and long waits.",
       "Between the copay costs and having no transportation, care is nearly out of reach for me."},
      {"Several major barriers limit my care; transportation is unreliable and every copay strains the budget.",
       "Getting care is hard; the transportation problem and the copay costs block many visits."},
      {"There are some barriers, the copay stings and transportation takes planning, but I manage partially.",
       "A few barriers remain; I juggle transportation and watch the copay, but mostly get seen."},
      {"Barriers are few and minor; transportation is easy and the copay is affordable.",
       "Hardly any barriers for me; a short drive and a small copay are all it takes."},
      {"There are no barriers to my care at all; transportation is covered and the copay is waived.",
       "I face zero barriers; free transportation from the center and no copay under my plan."}}},
    // Information on Diabetes Management - Knowledge Level
    {{{"I have no knowledge of diabetes management; nobody gave me any education about it.",
       "What I know about managing diabetes is nothing; no classes, no education, no explanations."},
      {"My knowledge of diabetes is thin; I learned a little once but most concepts escape me.",
       "The education I got about diabetes was minimal, and my knowledge of the basics is shaky."},
      {"I have moderate knowledge about diabetes; I learned the main ideas but gaps remain.",
       "My diabetes knowledge covers the essentials from a class, though some education never stuck."},
      {"My knowledge about diabetes is solid; I learned the mechanisms and the education made sense.",
       "I understand diabetes fairly well; the education classes gave me a good knowledge base."},
      {"My diabetes knowledge is excellent; I have read the research and my education on it runs deep.",
       "I could teach the diabetes education class myself; my knowledge of management is thorough."}}},
    // Information on Diabetes Management - Self-Care Practices
    {{{"I do no self-care for the diabetes; no exercise, no monitoring, no routine at all.",
       "There is no routine to my care; monitoring never happens and exercise is out of the question."},
      {"My self-care is rare; I might exercise or do some monitoring once in a long while.",
       "The routine barely exists; minimal monitoring and almost no exercise most weeks."},
      {"I keep some self-care going, regular walks for exercise, though monitoring is not comprehensive.",
       "Parts of my routine are consistent, like morning exercise, but the monitoring comes and goes."},
      {"My self-care routine is reliable; daily exercise and steady monitoring are habits now.",
       "I am regular about the routine, exercise most days and consistent monitoring."},
      {"My self-care is exemplary; a strict daily routine of exercise, careful monitoring, and foot checks.",
       "The routine runs like clockwork; thorough monitoring, daily exercise, and proactive habits."}}},
    // Information on Diabetes Management - Medication Adherence
    {{{"I never follow the medication schedule; the pills sit untouched and doses are skipped wholesale.",
       "The medication never gets taken as prescribed; I abandon the pills for weeks at a time."},
      {"My adherence to the medication is poor; I forget the pills often and lapse on doses frequently.",
       "The pills get missed a lot; my medication doses lapse several times a week."},
      {"I take the medication moderately well; occasional missed doses but the pills mostly get taken.",
       "My medication adherence is decent; I miss doses now and then but keep to the pills overall."},
      {"I am strong about the medication; doses on time with only minor lapses on the pills.",
       "The medication schedule holds; the pills are taken on time with rare missed doses."},
      {"My medication adherence is perfect; every dose of every pill exactly on schedule, never missed.",
       "I never miss a dose; the medication routine with the pills is airtight."}}},
}};

inline constexpr std::array<std::array<std::string_view, 3>, kSubtopicCount> kThemeCodeVariants = {{
    {"income level", "income level stability", "household income level"},
    {"housing situation", "housing situation quality", "stable housing situation"},
    {"financial stress", "financial stress worries", "ongoing financial stress"},
    {"diet quality", "overall diet quality", "diet quality habits"},
    {"food preferences", "personal food preferences", "food preferences taste"},
    {"dietary restrictions", "dietary restrictions adherence", "managing dietary restrictions"},
    {"family support", "family support network", "close family support"},
    {"friend support", "friend support circle", "reliable friend support"},
    {"community involvement", "community involvement groups", "active community involvement"},
    {"healthcare utilization", "healthcare utilization pattern", "regular healthcare utilization"},
    {"care satisfaction", "care satisfaction level", "overall care satisfaction"},
    {"care barriers", "care barriers faced", "practical care barriers"},
    {"diabetes knowledge", "diabetes knowledge depth", "practical diabetes knowledge"},
    {"self care practices", "daily self care practices", "self care practices routine"},
    {"medication adherence", "medication adherence consistency", "strict medication adherence"},
}};

inline constexpr std::array<std::string_view, 24> kFillers = {
    "I grew up on a small farm and moved to the city when I was young.",
    "We used to take the train up the coast every summer back then.",
    "My first job was at the cannery, long shifts but good people.",
    "The garden keeps me busy in the spring, mostly roses and tomatoes.",
    "I met my wife at a dance hall downtown, a story I love to tell.",
    "After the service I worked as a machinist for almost thirty years.",
    "The old radio shows were something; we would gather around every evening.",
    "I still write letters by hand, even though everyone tells me to text.",
    "The dog gets me out of the house every morning, rain or shine.",
    "We raised the kids in a little house by the river crossing.",
    "My grandfather taught me to fish with a bamboo pole and patience.",
    "Winters were harder where I grew up; snow to the windowsills.",
    "I like to read in the afternoon when the light comes through the kitchen.",
    "The neighborhood has changed so much since we first arrived.",
    "I used to sing in a quartet; we were not famous but we had fun.",
    "Retirement took some getting used to after all those working years.",
    "The grandkids visit in the summer and we bake bread together.",
    "I keep an old pickup truck running mostly out of stubbornness.",
    "Sunday mornings are for the crossword and a slow cup of coffee.",
    "We travelled once to see the redwoods, and I still think about them.",
    "My hearing is not what it was, so I ask people to speak up.",
    "The library downtown knows me by name at this point.",
    "I learned woodworking from a neighbor and still make small boxes.",
    "The weather here suits me, mild most of the year.",
};

inline constexpr std::array<std::string_view, 3> kA1cMentionTemplates = {
    "At my last visit the doctor said my A1C was {value}.",
    "They checked my labs recently and the A1C came back at {value}.",
    "The nurse told me my A1C number was {value} this time.",
};

}  // namespace bank

inline std::string_view planted_sentence(std::size_t subtopic, int level, std::size_t variant) {
    if (level < 1 || level > 5) throw Error(ErrorKind::Input, "level must be 1..5");
    return bank::kSentences.at(subtopic)[static_cast<std::size_t>(level - 1)][variant % 2];
}

inline std::string a1c_mention(std::size_t variant, double a1c) {
    std::string s(bank::kA1cMentionTemplates[variant % bank::kA1cMentionTemplates.size()]);
    const std::string value = format_fixed(a1c, 1);
    const auto pos = s.find("{value}");
    s.replace(pos, 7, value);
    return s;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace detail {

struct LabModel {
    double mean, sd, lo, hi;
};

// Plausible adult reference distributions; also the standardization basis for
// planted effects.
inline const std::array<LabModel, 5>& lab_models() {
    static const std::array<LabModel, 5> models = {{
        {150.0, 60.0, 50.0, 400.0},  // triglycerides
        {50.0, 12.0, 25.0, 90.0},    // hdl
        {110.0, 30.0, 40.0, 200.0},  // ldl
        {130.0, 35.0, 70.0, 260.0},  // glucose
        {1.0, 0.25, 0.5, 2.5},       // creatinine
    }};
    return models;
}

inline std::string patient_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%04zu", index + 1);
    return buf;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config) {
    config.validate();

    SyntheticCorpus out;
    out.records.reserve(config.n_patients);
    out.levels.reserve(config.n_patients);

    double effect_var = 0.0;
    for (const auto& [_, e] : config.planted_effect_sizes) effect_var += e * e;
    const double noise_sd =
        std::sqrt(std::max(config.a1c_sd * config.a1c_sd - effect_var, 1e-4));

    for (std::size_t p = 0; p < config.n_patients; ++p) {
        Rng rng = substream(config.seed, "synth.patient", p);
        const std::string id = detail::patient_id(p);

        // Planted subtopic levels.
        std::array<int, kSubtopicCount> levels{};
        for (std::size_t s = 0; s < kSubtopicCount; ++s)
            levels[s] = rng.bernoulli(config.subtopic_absence_rate)
                            ? -1
                            : static_cast<int>(rng.uniform_int(1, 5));

        // Labs.
        corpus::LabPanel labs;
        for (std::size_t j = 0; j < 5; ++j) {
            const auto& m = detail::lab_models()[j];
            const double v = rng.truncated_normal(m.mean, m.sd, m.lo, m.hi);
            if (!rng.bernoulli(config.lab_missing_rate)) labs.set(j, v);
        }

        // A1C = mean + planted linear signal + truncated noise.
        double signal = 0.0;
        for (const auto& [name, e] : config.planted_effect_sizes) {
            double z = 0.0;
            bool found = false;
            for (std::size_t s = 0; s < kSubtopicCount && !found; ++s) {
                if (feature_name(s) == name) {
                    found = true;
                    if (levels[s] > 0)
                        z = (static_cast<double>(levels[s]) - 3.0) / std::sqrt(2.0);
                }
            }
            if (!found) {
                for (std::size_t j = 0; j < 5; ++j) {
                    if (corpus::LabPanel::column_names()[j] == name) {
                        if (const auto v = labs.value(j))
                            z = (*v - detail::lab_models()[j].mean) / detail::lab_models()[j].sd;
                        break;
                    }
                }
            }
            signal += e * z;
        }
        double a1c = config.a1c_mean;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            a1c = config.a1c_mean + signal + noise_sd * rng.normal();
            if (a1c >= config.a1c_min && a1c <= config.a1c_max) break;
            a1c = std::min(std::max(config.a1c_mean + signal, config.a1c_min), config.a1c_max);
        }
        a1c = std::round(a1c * 10.0) / 10.0;
        a1c = std::min(std::max(a1c, config.a1c_min), config.a1c_max);

        // Transcript assembly: header, fillers, planted sentences in shuffled
        // order, an A1C mention, then filler padding to the word target.
        std::vector<std::string> sentences;
        sentences.push_back("Interviewer: This is the recorded life story conversation with participant " +
                            id + ".");
        sentences.push_back(std::string(bank::kFillers[rng.index(bank::kFillers.size())]));

        std::vector<std::size_t> order;
        for (std::size_t s = 0; s < kSubtopicCount; ++s)
            if (levels[s] > 0) order.push_back(s);
        rng.shuffle(order);
        for (const std::size_t s : order) {
            sentences.push_back(std::string(
                planted_sentence(s, levels[s], static_cast<std::size_t>(rng.uniform_int(0, 1)))));
            if (rng.bernoulli(0.4))
                sentences.push_back(std::string(bank::kFillers[rng.index(bank::kFillers.size())]));
        }

        if (rng.bernoulli(config.a1c_mention_rate)) {
            const std::string mention =
                a1c_mention(static_cast<std::size_t>(rng.uniform_int(0, 2)), a1c);
            const std::size_t pos =
                2 + rng.index(std::max<std::size_t>(sentences.size() - 2, 1));
            sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(pos), mention);
        }

        const std::size_t target =
            config.min_words +
            (config.extra_words_cap > 0 ? static_cast<std::size_t>(rng.uniform_int(
                                              0, static_cast<std::int64_t>(config.extra_words_cap)))
                                        : 0);
        auto total_words = [&sentences] {
            std::size_t n = 0;
            for (const auto& s : sentences) n += word_count(s);
            return n;
        };
        while (total_words() < target)
            sentences.push_back(std::string(bank::kFillers[rng.index(bank::kFillers.size())]));

        std::string text;
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            if (i > 0) text += (i % 5 == 0) ? "\n\n" : " ";
            text += sentences[i];
        }
        text += "\n";

        out.records.push_back(corpus::PatientRecord::make(
            id, corpus::Transcript::make(id, text), labs, a1c));
        out.levels.push_back(levels);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sidecar I/O: ground_truth.csv, one column per planted subtopic.
// ---------------------------------------------------------------------------

inline void save_ground_truth(const fs::path& dir, const SyntheticCorpus& corpus) {
    std::vector<std::string> header = {"patient_id"};
    for (std::size_t s = 0; s < kSubtopicCount; ++s) header.push_back(feature_name(s));
    std::string csv = csv_row(header);
    for (std::size_t p = 0; p < corpus.records.size(); ++p) {
        std::vector<std::string> row = {corpus.records[p].patient_id};
        for (std::size_t s = 0; s < kSubtopicCount; ++s)
            row.push_back(std::to_string(corpus.levels[p][s]));
        csv += csv_row(row);
    }
    write_file(dir / "ground_truth.csv", csv);
}

inline std::map<std::string, std::array<int, kSubtopicCount>> load_ground_truth(
    const fs::path& dir) {
    const auto rows = parse_csv(read_file(dir / "ground_truth.csv"));
    if (rows.empty() || rows[0].size() != kSubtopicCount + 1)
        throw Error(ErrorKind::Input, "ground_truth.csv has unexpected shape");
    std::map<std::string, std::array<int, kSubtopicCount>> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::array<int, kSubtopicCount> levels{};
        for (std::size_t s = 0; s < kSubtopicCount; ++s)
            levels[s] = std::stoi(rows[i][s + 1]);
        out[rows[i][0]] = levels;
    }
    return out;
}

inline void save_synthetic(const fs::path& dir, const SyntheticCorpus& corpus) {
    corpus::save_corpus(dir, corpus.records);
    save_ground_truth(dir, corpus);
}

}  // namespace sdohkit::synth
