// Probe a single synthetic Gaussian field on a cached scale-free graph and print
// the transport record as JSON.
//
//   sample_probe [N] [cache_dir]

#include <cstdlib>
#include <iostream>
#include <string>

#include "fsgt/fsgt.hpp"

int main(int argc, char** argv) {
  const std::uint64_t n = argc > 1 ? std::stoull(argv[1]) : 100000;
  const std::string cache = argc > 2 ? argv[2] : "cache";

  fsgt::FieldSnapshot snap;
  snap.manifest.model_id = "sample";
  snap.manifest.step = 0;
  snap.manifest.field_kind = fsgt::FieldKind::synthetic;
  snap.manifest.n_elements = n;
  snap.values = fsgt::gaussian_field(n, 0.0, 1.0, 123);

  const auto graph = fsgt::get_or_build(fsgt::GraphKey{n, 2, 42}, cache);
  const auto result = fsgt::run_cascade(snap, graph, fsgt::CascadeConfig{});
  std::cout << fsgt::render(fsgt::to_json(fsgt::make_record(snap.manifest, fsgt::NullVariant::real, result)));
  return 0;
}
