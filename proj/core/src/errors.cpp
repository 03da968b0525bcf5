#include "eccot/errors.hpp"

namespace eccot {

void throw_contract(const std::string& what) { throw ContractViolation(what); }

}  // namespace eccot
