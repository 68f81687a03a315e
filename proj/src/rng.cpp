#include "reveal/rng.hpp"

#include "reveal/error.hpp"

#include <sstream>

namespace reveal {

std::string rng_state(const Rng& rng)
{
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from_state(const std::string& state)
{
    Rng rng;
    std::istringstream is(state);
    is >> rng;
    require(!is.fail(), ErrorCode::Format, "corrupt RNG state");
    return rng;
}

} // namespace reveal
