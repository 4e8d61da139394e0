#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "chatids/rubric.hpp"

using namespace chatids;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string example_text() { return read_file(CHATIDS_TEST_FIXTURES_DIR "/example_explanation.txt"); }

PersonaConfig persona() { return PersonaConfig::load(CHATIDS_TEST_DATA_DIR "/persona.conf"); }
UrgencyLexicon lexicon() { return UrgencyLexicon::load(CHATIDS_TEST_DATA_DIR "/urgency_lexicon.txt"); }

const char* kAllCues =
    "We noticed that a stranger on the internet is trying to reach your smart lighting bridge right now.\n\n"
    "If you do nothing, the stranger could switch your lights or look at your home network. Please act immediately.\n\n"
    "To stop it, please follow these steps:\n"
    "1. Unplug the bridge from the power.\n"
    "2. Press the reset button on the back for five seconds.\n"
    "3. Change the password in the app.\n";

}  // namespace

TEST_CASE("sections: figure text") {
    auto text = example_text();
    auto s = detect_sections(text);
    REQUIRE(s.description);
    REQUIRE(s.consequences);
    REQUIRE(s.instructions);
    CHECK(s.description->end <= s.consequences->begin);
    CHECK(s.consequences->end <= s.instructions->begin);
    std::string instr = text.substr(s.instructions->begin, s.instructions->end - s.instructions->begin);
    CHECK(instr.find("1. Isolate") != std::string::npos);
    CHECK(instr.find("4. Check") != std::string::npos);
    CHECK(s.steps.size() == 4);
}

TEST_CASE("sections: degenerate") {
    auto s = detect_sections("Hello.");
    CHECK_FALSE(s.description);
    CHECK_FALSE(s.consequences);
    CHECK_FALSE(s.instructions);

    auto list = detect_sections("1. Unplug it.\n2. Reset it.\n");
    CHECK(list.instructions);
    CHECK_FALSE(list.description);
    CHECK_FALSE(list.consequences);
}

TEST_CASE("itemized steps") {
    CHECK(count_itemized_steps(example_text()) == 4);
    CHECK(count_itemized_steps("no list here") == 0);
    CHECK(count_itemized_steps("1. one\n- two\n- three\n") == 3);
    CHECK(count_itemized_steps("* a\n2) b\n") == 2);
}

TEST_CASE("forbidden term hits") {
    std::vector<std::string> terms{"DDoS", "malware", "Distributed Denial of Service"};
    auto text = example_text();
    auto hits = forbidden_term_hits(text, terms);
    CHECK(hits.size() >= 3);
    for (const auto& h : hits) {
        bool matches = false;
        for (const auto& t : terms) matches = matches || iequals(text.substr(h.offset, t.size()), t);
        CHECK(matches);
    }
    CHECK(forbidden_term_hits("all clear", terms).empty());
    auto first = forbidden_term_hits("malware found", terms);
    REQUIRE(first.size() == 1);
    CHECK(first[0].offset == 0);
    CHECK(forbidden_term_hits("antimalwares", terms).empty());

    std::vector<std::string> overlapping{"denial of service", "Distributed Denial of Service"};
    CHECK(forbidden_term_hits("a distributed denial of service attack", overlapping).size() == 2);
}

TEST_CASE("score: figure text matches the evaluated marks") {
    auto s = score(example_text(), persona(), lexicon());
    CHECK(s.desc);
    CHECK(s.cons);
    CHECK_FALSE(s.urg);
    CHECK_FALSE(s.intuitive);
    CHECK(s.detail.itemized_steps == 4);
    CHECK(s.corr == CorrectnessMark::Unscored);
    auto has = [&](std::string_view term) {
        for (const auto& h : s.detail.forbidden_hits) {
            if (iequals(h.term, term)) return true;
        }
        return false;
    };
    CHECK(has("malware"));
    CHECK(has("DDoS"));
}

TEST_CASE("score: empty and all-cue texts") {
    auto empty = score("", persona(), lexicon());
    CHECK_FALSE(empty.desc);
    CHECK_FALSE(empty.cons);
    CHECK_FALSE(empty.meas);
    CHECK_FALSE(empty.urg);
    CHECK(empty.detail.itemized_steps == 0);

    auto full = score(kAllCues, persona(), lexicon());
    CHECK(full.desc);
    CHECK(full.cons);
    CHECK(full.meas);
    CHECK(full.urg);
    CHECK(full.intuitive);
    CHECK(full.detail.forbidden_hits.empty());
}

TEST_CASE("readability") {
    CHECK(readability_grade("The cat sat on the mat.") < 3.0);
    CHECK(readability_grade("Unauthorized authentication infrastructure reconfiguration necessitates "
                            "comprehensive organizational deliberation.") > 12.0);
}

TEST_CASE("imperative heuristic") {
    CHECK(looks_imperative("Unplug the bridge."));
    CHECK(looks_imperative("Please reset the router."));
    CHECK_FALSE(looks_imperative("The bridge is fine."));
}

TEST_CASE("property: rubric invariants") {
    auto p = persona();
    auto lex = lexicon();
    std::mt19937_64 rng(5);
    const std::vector<std::string> parts = {
        "Your device talks to a stranger. ", "This could cost you money. ", "Act immediately. ",
        "The malware spreads. ", "\n1. Unplug the device.\n", "\n- Reset the router.\n",
        "If you ignore this, thieves could watch you. ", "We detected a problem on your camera. ",
        "Please follow these steps:\n", "firmware ",
    };
    for (int i = 0; i < 500; ++i) {
        std::string text;
        int n = 1 + static_cast<int>(rng() % 8);
        for (int j = 0; j < n; ++j) text += parts[rng() % parts.size()];
        auto s = score(text, p, lex);
        auto again = score(text, p, lex);
        CHECK(s.intuitive == again.intuitive);
        CHECK(s.detail.itemized_steps == again.detail.itemized_steps);
        if (s.intuitive) CHECK(s.detail.forbidden_hits.empty());
        if (s.meas) CHECK(s.detail.itemized_steps >= 2);
        auto sections = detect_sections(text);
        std::size_t last = 0;
        for (const auto& sp : {sections.description, sections.consequences, sections.instructions}) {
            if (!sp) continue;
            CHECK(sp->begin >= last);
            CHECK(sp->begin <= sp->end);
            last = sp->end;
        }
        if (!s.intuitive) CHECK_FALSE(score(text + " malware", p, lex).intuitive);
    }
}

TEST_CASE("table rendering") {
    auto s = score(example_text(), persona(), lexicon());
    auto row = rubric_table_row("Harakit", s);
    CHECK(row.rfind("Harakit\t", 0) == 0);
    CHECK(rubric_table_header().find("Corr") != std::string::npos);
}
