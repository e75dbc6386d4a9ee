// Writes a full-rank PEG parity-check matrix as an alist file.
//   ppcshape_make_code --n 2016 --k 1344 --column-weight 3 --seed 7 --out code.alist

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "ppcshape/ldpc.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PEG code generator"};
  std::size_t n = 2016, k = 1344;
  int weight = 3;
  std::uint64_t seed = 7;
  std::string out;
  app.add_option("--n", n, "code length");
  app.add_option("--k", k, "information length");
  app.add_option("--column-weight", weight, "variable-node degree");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "alist output path")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto pc = ppcshape::generate_full_rank_peg(n, k, weight, seed);
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << ppcshape::write_alist(pc);
    std::cerr << "n " << pc.n() << " k " << pc.k() << " checks " << pc.checks() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
