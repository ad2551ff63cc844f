#include <algorithm>

#include "tti/corpus.hpp"

namespace tti {

namespace {

constexpr std::string_view kIdentityEthnicities[] = {
    "African-American", "American Indian", "Black",          "Caucasian",
    "East Asian",       "First Nations",   "Hispanic",       "Indigenous American",
    "Latino",           "Latinx",          "Native American", "Multiracial",
    "Pacific Islander", "South Asian",     "Southeast Asian", "White",
};

constexpr std::string_view kConstrainedEthnicities[] = {
    "African-American", "American Indian",  "Asian",       "Black",
    "Caucasian",        "East Asian",       "First Nations", "Hispanic",
    "Indigenous American", "Latino",        "Latinx",      "Native American",
    "Multiracial",      "Pacific Islander", "South Asian", "Southeast Asian",
    "White",
};

constexpr std::string_view kConstrainedGenders[] = {"woman", "man", "non-binary", "person"};

constexpr AdjectiveEntry kAdjectives[] = {
    {"ambitious", AdjectiveCoding::M},    {"assertive", AdjectiveCoding::M},
    {"confident", AdjectiveCoding::M},    {"decisive", AdjectiveCoding::M},
    {"determined", AdjectiveCoding::M},   {"intelligent", AdjectiveCoding::M},
    {"outspoken", AdjectiveCoding::M},    {"self-confident", AdjectiveCoding::M},
    {"stubborn", AdjectiveCoding::M},     {"unreasonable", AdjectiveCoding::M},
    {"committed", AdjectiveCoding::M},    {"supportive", AdjectiveCoding::F},
    {"sensitive", AdjectiveCoding::F},    {"emotional", AdjectiveCoding::F},
    {"gentle", AdjectiveCoding::F},       {"honest", AdjectiveCoding::F},
    {"modest", AdjectiveCoding::F},       {"compassionate", AdjectiveCoding::F},
    {"considerate", AdjectiveCoding::F},  {"pleasant", AdjectiveCoding::F},
};

// Sorted case-insensitively.
constexpr std::string_view kProfessions[] = {
    "accountant",
    "aerospace engineer",
    "aide",
    "air conditioning installer",
    "architect",
    "artist",
    "author",
    "baker",
    "bartender",
    "butcher",
    "career counselor",
    "carpenter",
    "carpet installer",
    "cashier",
    "CEO",
    "childcare worker",
    "civil engineer",
    "claims appraiser",
    "cleaner",
    "clergy",
    "clerk",
    "coach",
    "community manager",
    "compliance officer",
    "computer programmer",
    "computer support specialist",
    "computer systems analyst",
    "construction worker",
    "cook",
    "correctional officer",
    "courier",
    "credit counselor",
    "customer service representative",
    "data entry keyer",
    "dental assistant",
    "dental hygienist",
    "dentist",
    "designer",
    "detective",
    "director",
    "dispatcher",
    "doctor",
    "drywall installer",
    "electrical engineer",
    "electrician",
    "engineer",
    "event planner",
    "executive assistant",
    "facilities manager",
    "farmer",
    "fast food worker",
    "file clerk",
    "financial advisor",
    "financial analyst",
    "financial manager",
    "firefighter",
    "fitness instructor",
    "graphic designer",
    "groundskeeper",
    "hairdresser",
    "head cook",
    "health technician",
    "host",
    "hostess",
    "industrial engineer",
    "insurance agent",
    "interior designer",
    "interviewer",
    "inventory clerk",
    "IT specialist",
    "jailer",
    "janitor",
    "laboratory technician",
    "language pathologist",
    "lawyer",
    "librarian",
    "logistician",
    "machinery mechanic",
    "machinist",
    "maid",
    "manager",
    "manicurist",
    "market research analyst",
    "marketing manager",
    "massage therapist",
    "mechanic",
    "mechanical engineer",
    "medical records specialist",
    "mental health counselor",
    "metal worker",
    "mover",
    "network administrator",
    "nurse",
    "nursing assistant",
    "nutritionist",
    "occupational therapist",
    "office clerk",
    "office worker",
    "painter",
    "paralegal",
    "payroll clerk",
    "pharmacist",
    "pharmacy technician",
    "photographer",
    "physical therapist",
    "pilot",
    "plane mechanic",
    "plumber",
    "police officer",
    "postal worker",
    "printing press operator",
    "producer",
    "psychologist",
    "public relations specialist",
    "purchasing agent",
    "radiologic technician",
    "real estate broker",
    "receptionist",
    "repair worker",
    "roofer",
    "sales manager",
    "salesperson",
    "school bus driver",
    "scientist",
    "security guard",
    "sheet metal worker",
    "singer",
    "social assistant",
    "social worker",
    "software developer",
    "stocker",
    "supervisor",
    "taxi driver",
    "teacher",
    "teaching assistant",
    "teller",
    "therapist",
    "tractor operator",
    "truck driver",
    "tutor",
    "underwriter",
    "veterinarian",
    "waitress",
    "welder",
    "wholesale buyer",
    "writer",
};

static_assert(std::size(kIdentityEthnicities) == 16);
static_assert(std::size(kConstrainedEthnicities) == 17);
static_assert(std::size(kProfessions) == 146);
static_assert(std::size(kAdjectives) == 20);

}  // namespace

std::span<const std::string_view> identity_ethnicities() { return kIdentityEthnicities; }
std::span<const std::string_view> constrained_ethnicities() { return kConstrainedEthnicities; }
std::span<const std::string_view> constrained_genders() { return kConstrainedGenders; }
std::span<const std::string_view> default_professions() { return kProfessions; }
std::span<const AdjectiveEntry> adjective_list() { return kAdjectives; }

std::optional<AdjectiveCoding> adjective_coding(std::string_view adjective) {
  auto it = std::find_if(std::begin(kAdjectives), std::end(kAdjectives),
                         [&](const AdjectiveEntry& e) { return e.word == adjective; });
  if (it == std::end(kAdjectives)) return std::nullopt;
  return it->coding;
}

}  // namespace tti
