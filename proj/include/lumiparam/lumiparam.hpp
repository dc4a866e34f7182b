#ifndef LUMIPARAM_LUMIPARAM_HPP
#define LUMIPARAM_LUMIPARAM_HPP

#include "lumiparam/adam.hpp"
#include "lumiparam/core.hpp"
#include "lumiparam/extract.hpp"
#include "lumiparam/io.hpp"
#include "lumiparam/nnls.hpp"
#include "lumiparam/optimize.hpp"
#include "lumiparam/parallel.hpp"
#include "lumiparam/project.hpp"
#include "lumiparam/render_eval.hpp"
#include "lumiparam/spatial.hpp"

#endif // LUMIPARAM_LUMIPARAM_HPP
