#include "kfree/hifloat.hpp"

#include <iomanip>
#include <sstream>

namespace kfree {

std::string format_sig(const HiFloat& x, unsigned sig_digits)
{
    std::ostringstream out;
    out << std::scientific << std::setprecision(static_cast<int>(sig_digits == 0 ? 0 : sig_digits - 1)) << x;
    return out.str();
}

}  // namespace kfree
