#include <doctest.h>

#include <regex>

#include "tweetsift/preprocess.hpp"
#include "tweetsift/rng.hpp"

using namespace tweetsift;

TEST_CASE("preproc1 examples") {
    CHECK(preproc1("@WHO BREAKING!!! 500 cases... https://t.co/abc") == "breaking ! ! ! 500 cases . . .");
    CHECK(preproc1("café") == "caf");
    CHECK(preproc1("") == "");
    CHECK(preproc1("RT @user: wow") == "wow");
    CHECK(preproc1("   spaced\t\tout  ") == "spaced out");
    CHECK(preproc1("see www.example.com now") == "see now");
    CHECK(preproc1("single! stays") == "single! stays");
}

TEST_CASE("preproc1 fuzz: idempotent, printable ASCII, no http/@/..") {
    const std::vector<std::string> pieces{"http://x.co/a", "https", "www.site.org", "@name", "RT", "rt", "...", "..",
                                          "!!", "!!!!", "!", "Hello", "WORLD", "café", "naïve", "\xF0\x9F\x98\x80",
                                          "a.b", "x@y", "..http", "h.t.t.p", "ht", "tp", "\t", " ", "5M", "can't",
                                          "p . m .", ".", "@", "é@", "!.!.", "www.", "ww"};
    const std::regex printable("[ -~]*");
    Rng rng(2024);
    for (int trial = 0; trial < 3000; ++trial) {
        std::string text;
        const auto n = rng.below(12);
        for (std::size_t i = 0; i < n; ++i) {
            text += pieces[rng.below(pieces.size())];
            const auto sep = rng.below(4);
            if (sep == 0) text += ' ';
            else if (sep == 1) text += "  ";
        }
        const auto once = preproc1(text);
        INFO("input: " << text);
        CHECK(preproc1(once) == once);
        CHECK(std::regex_match(once, printable));
        CHECK(once.find("http") == std::string::npos);
        CHECK(once.find('@') == std::string::npos);
        CHECK(once.find("..") == std::string::npos);
        for (char c : once) CHECK(!(c >= 'A' && c <= 'Z'));
    }
}

TEST_CASE("preproc2 examples") {
    CHECK(preproc2("can't") == "cannot");
    CHECK(preproc2("p . m .") == "p.m.");
    CHECK(preproc2("5M cases") == "5 million cases");
    CHECK(preproc2("won't stop") == "will not stop");
    CHECK(preproc2("they're here") == "they are here");
    CHECK(preproc2("we'll see") == "we will see");
    CHECK(preproc2("I've been") == "I have been");
    CHECK(preproc2("I'm fine") == "I am fine");
    CHECK(preproc2("didn't") == "did not");
    CHECK(preproc2("2K deaths") == "2 thousand deaths");
    CHECK(preproc2("3B people") == "3 billion people");
    CHECK(preproc2("a . m . and u . s .") == "a.m. and u.s.");
    CHECK(preproc2("M is a letter") == "M is a letter");
}

TEST_CASE("contraction table loads from the shipped data file") {
    const auto t = ContractionTable::load(TWEETSIFT_SOURCE_DIR "/data/contractions.json");
    CHECK(t.words == ContractionTable::builtin().words);
    CHECK(t.abbreviations == ContractionTable::builtin().abbreviations);
    CHECK(preproc2("can't", t) == "cannot");
}

TEST_CASE("strategy P2_THEN_P1 lowercases after expanding") {
    CHECK(apply_strategy(PreprocStrategy::P2ThenP1, "Can't STOP 5M") == "cannot stop 5 million");
    CHECK(apply_strategy(PreprocStrategy::P1, "Can't") == preproc1("Can't"));
    CHECK(apply_strategy(PreprocStrategy::P2, "Can't") == "Cannot");
    CHECK(parse_strategy("P2_THEN_P1") == PreprocStrategy::P2ThenP1);
    CHECK(strategy_name(PreprocStrategy::P2) == "P2");
}

TEST_CASE("tokenize") {
    CHECK(tokenize("breaking 500 cases") == std::vector<std::string>{"breaking", "500", "cases"});
    CHECK(tokenize("  ").empty());
    CHECK(tokenize("a  b") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("build_vocab examples") {
    const std::vector<std::vector<std::string>> corpus{{"a", "a", "b"}, {"a", "c"}};
    const auto v2 = build_vocab(corpus, 2, 100);
    CHECK(v2.size() == 3);
    CHECK(v2.id("a") == 2);
    CHECK(v2.id("b") == Vocab::unk_id);

    const auto v1 = build_vocab(corpus, 1, 100);
    CHECK(v1.tokens() == std::vector<std::string>{"<pad>", "<unk>", "a", "b", "c"});

    const auto empty = build_vocab({}, 1, 100);
    CHECK(empty.size() == 2);
    CHECK(empty.token(Vocab::pad_id) == "<pad>");
    CHECK(empty.token(Vocab::unk_id) == "<unk>");

    CHECK(build_vocab(corpus, 1, 3).tokens() == std::vector<std::string>{"<pad>", "<unk>", "a"});
    CHECK_THROWS(build_vocab(corpus, 0, 10));
    CHECK_THROWS(build_vocab(corpus, 1, 2));
}

TEST_CASE("vocab ids are dense; reserved tokens in text are unknown words") {
    Rng rng(5);
    std::vector<std::vector<std::string>> corpus(50);
    for (auto& doc : corpus)
        for (int i = 0; i < 10; ++i) doc.push_back("w" + std::to_string(rng.below(40)));
    corpus.push_back({"<pad>", "<unk>"});
    const auto v = build_vocab(corpus, 1, 1000);
    CHECK(v.token(Vocab::pad_id) == "<pad>");
    CHECK(v.token(Vocab::unk_id) == "<unk>");
    for (std::size_t id = 2; id < v.size(); ++id) CHECK(v.id(v.token(static_cast<int>(id))) == static_cast<int>(id));
    // Text that happens to spell a reserved token is just an unknown word.
    CHECK(v.id("<pad>") == Vocab::unk_id);
    CHECK(v.id("<unk>") == Vocab::unk_id);
}

TEST_CASE("vocab JSON round trip") {
    const auto v = build_vocab({{"x", "y", "y"}}, 1, 10);
    const auto back = Vocab::from_json(v.to_json());
    CHECK(back == v);
    CHECK(v.to_json().find("\"tokens\"") != std::string::npos);
}

TEST_CASE("encode examples") {
    const auto v = build_vocab({{"a"}}, 1, 10);
    const auto e = encode({"a", "zzz"}, v, 4);
    CHECK(e.ids == std::vector<int>{2, 1, 0, 0});
    CHECK(e.mask == std::vector<int>{1, 1, 0, 0});
    CHECK(e.true_len == 2);

    std::vector<std::string> many(200, "a");
    CHECK(encode(many, v, 128).true_len == 128);
    CHECK(encode(many, v, 128).ids.size() == 128);

    const auto z = encode({}, v, 5);
    CHECK(z.true_len == 0);
    CHECK(z.ids == std::vector<int>(5, 0));
    CHECK(z.mask == std::vector<int>(5, 0));
}

TEST_CASE("encode then decode reproduces in-vocabulary tokens") {
    Rng rng(8);
    std::vector<std::vector<std::string>> corpus(20);
    for (auto& doc : corpus)
        for (int i = 0; i < 8; ++i) doc.push_back("t" + std::to_string(rng.below(30)));
    const auto v = build_vocab(corpus, 1, 1000);
    for (const auto& doc : corpus) {
        const auto e = encode(doc, v, 16);
        std::vector<std::string> back;
        for (std::size_t i = 0; i < e.true_len; ++i) back.push_back(v.token(e.ids[i]));
        CHECK(back == doc);
        for (std::size_t i = 0; i < e.ids.size(); ++i) {
            CHECK((e.mask[i] == 1) == (i < e.true_len));
            if (i >= e.true_len) CHECK(e.ids[i] == Vocab::pad_id);
        }
    }
}
