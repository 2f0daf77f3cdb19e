#include <doctest.h>

#include <fstream>

#include "scepipe/records.hpp"
#include "scepipe/synth.hpp"

#include "test_util.hpp"

using namespace scepipe;
using scepipe::test::ScratchDir;
using scepipe::test::thrownCode;

TEST_SUITE_BEGIN("records");

TEST_CASE("serialize orders keys canonically") {
    Record record;
    record.set("zeta", "1");
    record.set("alpha", "2");
    record.set("mid.key", "3");
    CHECK(record.serialize() == "alpha=2\tmid.key=3\tzeta=1");
}

TEST_CASE("values round-trip through escaping") {
    Record record;
    record.set("text", "line1\nline2\ttabbed\\slash\rcr");
    record.set("empty", "");
    record.set("eq", "a=b=c");
    const Record parsed = Record::parse(record.serialize());
    CHECK(parsed.get("text") == "line1\nline2\ttabbed\\slash\rcr");
    CHECK(parsed.get("empty") == "");
    CHECK(parsed.get("eq") == "a=b=c");
}

TEST_CASE("round-trip property over adversarial strings") {
    DeterministicRng rng(2024);
    const std::string alphabet = "ab=\t\n\r\\xyz 0189{}|;,";
    for (int trial = 0; trial < 500; ++trial) {
        Record record;
        const int fields = 1 + static_cast<int>(rng.nextU64() % 5);
        for (int f = 0; f < fields; ++f) {
            std::string value;
            const std::size_t length = rng.nextU64() % 24;
            for (std::size_t i = 0; i < length; ++i)
                value += alphabet[rng.nextU64() % alphabet.size()];
            record.set("f" + std::to_string(f), value);
        }
        const Record parsed = Record::parse(record.serialize());
        CHECK(parsed.fields() == record.fields());
    }
}

TEST_CASE("doubles round-trip bit-exactly") {
    DeterministicRng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const double value = (rng.nextUnit() - 0.5) * 1e6 * rng.nextUnit();
        Record record;
        record.set("x", value);
        CHECK(Record::parse(record.serialize()).getDouble("x") == value);
    }
}

TEST_CASE("malformed lines raise typed errors") {
    CHECK(thrownCode([] { Record::parse("novalue"); }) == Errc::MalformedRecord);
    CHECK(thrownCode([] { Record::parse("a=1\ta=2"); }) == Errc::MalformedRecord);
    CHECK(thrownCode([] { Record::parse("BAD=1"); }) == Errc::MalformedRecord);
    CHECK(thrownCode([] { Record::parse("a=trailing\\"); }) == Errc::MalformedRecord);
    CHECK(thrownCode([] { Record::parse("a=bad\\qescape"); }) == Errc::MalformedRecord);
    Record record;
    CHECK(thrownCode([&] { record.set("UPPER", "x"); }) == Errc::MalformedRecord);
    CHECK(thrownCode([&] { record.get("missing"); }) == Errc::MalformedRecord);
}

TEST_CASE("records files read back and report line numbers") {
    ScratchDir dir("records");
    Record a;
    a.set("id", "one");
    Record b;
    b.set("id", "two\nlines");
    writeRecordsFile(dir.file("ok.records"), {a, b});
    const auto loaded = readRecordsFile(dir.file("ok.records"));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[1].get("id") == "two\nlines");

    CHECK(thrownCode([&] { readRecordsFile(dir.file("absent.records")); }) == Errc::MissingFile);

    {
        std::ofstream bad(dir.file("bad.records"));
        bad << "id=fine\nbroken line\n";
    }
    try {
        readRecordsFile(dir.file("bad.records"));
        FAIL("expected MalformedRecord");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::MalformedRecord);
        CHECK(std::string(err.what()).find(":2:") != std::string::npos);
    }
}

TEST_SUITE_END();
