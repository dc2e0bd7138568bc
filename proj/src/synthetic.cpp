#include "reasongr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string_view>

#include "reasongr/types.hpp"

namespace reasongr::synthetic {
namespace {

constexpr std::array<std::string_view, 16> kOnsets = {"b", "c", "d", "f", "g", "k", "l", "m",
                                                      "n", "p", "r", "s", "t", "v", "z", "qu"};
constexpr std::array<std::string_view, 6> kVowels = {"a", "e", "i", "o", "u", "y"};
constexpr std::array<std::string_view, 8> kCodas = {"x", "n", "r", "l", "s", "m", "t", "k"};

constexpr std::array<std::string_view, 60> kTopics = {
    "derivatives",  "hedging",     "goodwill",     "impairment",  "leases",       "pension",
    "restructuring", "dividends",  "repurchases",  "inventory",   "receivables",  "warranty",
    "litigation",   "acquisition", "divestiture",  "amortization", "depreciation", "royalties",
    "tariffs",      "commodities", "currency",     "securitization", "debentures", "annuities",
    "reinsurance",  "backlog",     "franchise",    "licensing",   "semiconductors", "refinery",
    "pipelines",    "satellites",  "pharmacy",     "biologics",   "aviation",     "shipping",
    "railcars",     "mortgages",   "underwriting", "custody",     "brokerage",    "timber",
    "fertilizer",   "uranium",     "copper",       "aluminum",    "broadband",    "wireless",
    "streaming",    "advertising", "cosmetics",    "beverages",   "tobacco",      "casinos",
    "hospitals",    "clinics",     "software",     "cloud",       "datacenters",  "logistics"};

constexpr std::array<std::string_view, 12> kLineItems = {
    "net revenue",      "operating income", "total assets",    "interest expense",
    "net income",       "capital expenditures", "free cash flow", "gross margin",
    "long-term debt",   "income tax expense",  "research costs",  "segment profit"};

std::string make_name(Rng& rng, std::set<std::string>& used) {
  std::uniform_int_distribution<std::size_t> onset(0, kOnsets.size() - 1);
  std::uniform_int_distribution<std::size_t> vowel(0, kVowels.size() - 1);
  std::uniform_int_distribution<std::size_t> coda(0, kCodas.size() - 1);
  while (true) {
    std::string name;
    name += kOnsets[onset(rng)];
    name += kVowels[vowel(rng)];
    name += kOnsets[onset(rng)];
    name += kVowels[vowel(rng)];
    name += kCodas[coda(rng)];
    std::transform(name.begin(), name.end(), name.begin(), ::toupper);
    if (used.insert(name).second) return name;
  }
}

}  // namespace

std::vector<corpus::Document> generate_corpus(const CorpusOptions& options) {
  Rng rng(options.seed);
  const std::size_t n_companies = options.companies == 0 ? options.documents : options.companies;
  std::set<std::string> used;
  std::vector<std::string> companies;
  for (std::size_t i = 0; i < n_companies; ++i) companies.push_back(make_name(rng, used));

  std::uniform_int_distribution<int> base_year(2004, 2014);
  std::vector<int> first_year;
  for (std::size_t i = 0; i < n_companies; ++i) first_year.push_back(base_year(rng));

  std::uniform_int_distribution<std::size_t> topic(0, kTopics.size() - 1);
  std::uniform_int_distribution<int> value(100, 9999);
  std::uniform_int_distribution<int> page(10, 120);

  std::vector<corpus::Document> docs;
  for (std::size_t i = 0; i < options.documents; ++i) {
    const std::size_t c = i % n_companies;
    const int year = first_year[c] + static_cast<int>(i / n_companies);
    corpus::Document doc;
    doc.company = companies[c];
    doc.year = std::to_string(year);
    doc.raw_id = doc.company + "/" + doc.year + "/page_" + std::to_string(page(rng)) + ".pdf-" +
                 std::to_string(i % 4 + 1);

    std::array<std::string_view, 3> t{};
    for (std::size_t k = 0; k < t.size(); ++k) {
      do {
        t[k] = kTopics[topic(rng)];
      } while (std::find(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(k), t[k]) !=
               t.begin() + static_cast<std::ptrdiff_t>(k));
    }
    doc.pre_text = {
        doc.company + " reported " + std::string(t[0]) + " and " + std::string(t[1]) +
            " results for fiscal " + doc.year + " .",
        "the " + std::string(t[2]) + " program of " + doc.company + " expanded during the year ."};
    doc.post_text = {"management expects " + std::string(t[0]) + " exposure at " + doc.company +
                     " to remain stable ."};

    std::vector<std::string> header{""};
    for (std::size_t col = 1; col < options.table_cols; ++col) {
      header.push_back(std::to_string(year - static_cast<int>(col) + 1));
    }
    doc.table.push_back(header);
    std::vector<std::size_t> items(kLineItems.size());
    for (std::size_t k = 0; k < items.size(); ++k) items[k] = k;
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t row = 1; row < options.table_rows; ++row) {
      std::vector<std::string> cells{std::string(kLineItems[items[(row - 1) % items.size()]])};
      for (std::size_t col = 1; col < options.table_cols; ++col) cells.push_back(std::to_string(value(rng)));
      doc.table.push_back(std::move(cells));
    }
    if (doc.table.size() > 1) {
      doc.question = "what was the percentage change in " + doc.table[1][0] + " for " + doc.company +
                     " in " + doc.year + "?";
    } else {
      doc.question = "what did " + doc.company + " report about " + std::string(t[0]) + "?";
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace reasongr::synthetic
