// Writes every catalog entry and the manifest into a fixtures directory.
#include <filesystem>
#include <iostream>

#include "riskgraph/catalog.hpp"
#include "riskgraph/io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: write_fixtures <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  for (const auto& id : riskgraph::catalog_ids()) {
    const auto entry = riskgraph::build_entry(id);
    riskgraph::write_file((dir / riskgraph::fixture_file(id)).string(), riskgraph::fixture_text(entry));
  }
  riskgraph::write_file((dir / "manifest.json").string(), riskgraph::catalog_manifest().dump(2) + "\n");
  std::cout << riskgraph::catalog_ids().size() << " fixtures written to " << dir.string() << "\n";
  return 0;
}
