#include <stdexcept>

#include "doctest.h"
#include "nnpda/manifest.hpp"

using namespace nnpda;

TEST_CASE("digest is stable") {
  CHECK(digest_bytes("") == "fnv1a64:cbf29ce484222325");
  CHECK(digest_bytes("a") == "fnv1a64:af63dc4c8601ec8c");
  CHECK(digest_bytes("y10\n") != digest_bytes("n10\n"));
}

TEST_CASE("manifest json round trip") {
  RunManifest m;
  m.config = "grammar = paren\neta = 0.1\n";
  m.seed = 7;
  m.dataset_path = "data.txt";
  m.dataset_digest = digest_bytes("y10\n");
  m.model_path = "m.txt";
  m.metrics_path = "m.tsv";
  m.epochs = 42;
  m.converged = true;
  CHECK(RunManifest::parse(m.to_json()) == m);
  CHECK(RunManifest::parse(m.to_json()).to_json() == m.to_json());
  CHECK_THROWS_AS(RunManifest::parse("{\"seed\": 1}"), std::invalid_argument);
}
