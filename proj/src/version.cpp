#include "gpo/common.hpp"

namespace gpo {

const char *version_string() { return GPO_VERSION_STRING; }
const char *build_id() { return GPO_BUILD_ID; }

} // namespace gpo
