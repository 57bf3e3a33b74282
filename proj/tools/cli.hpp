#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "yamabe/mesh.hpp"

namespace yamabe::cli {

// Exit codes: 0 success, 1 domain error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Initial data grammar: const:<v>, perturb:<amp>, bubble:<eps>,<x>,<y>, file:<path>.
ScalarField initial_field(const SimplicialMesh& mesh, const std::string& spec);

}  // namespace yamabe::cli
