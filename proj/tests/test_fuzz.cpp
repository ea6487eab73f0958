#include "doctest.h"

#include "support.hpp"

using namespace cogmark;

TEST_CASE("fuzz: transcript parser raises only typed errors") {
  const auto r = test::fuzz_transcript_parser(10000, 1);
  CHECK(r.inputs == 10000);
  CHECK_MESSAGE(r.untyped_errors == 0, r.first_untyped);
  // The mutator must reach both outcomes to mean anything.
  CHECK(r.accepted > 100);
  CHECK(r.typed_errors > 1000);
}

TEST_CASE("fuzz: manifest parser raises only typed errors") {
  const auto r = test::fuzz_manifest_parser(10000, 2);
  CHECK(r.inputs == 10000);
  CHECK_MESSAGE(r.untyped_errors == 0, r.first_untyped);
  CHECK(r.accepted > 100);
  CHECK(r.typed_errors > 1000);
}
