#pragma once

#include "gblab/bilinear.hpp"
#include "gblab/bump.hpp"
#include "gblab/embeddings.hpp"
#include "gblab/errors.hpp"
#include "gblab/fft.hpp"
#include "gblab/illposedness.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"
#include "gblab/quadrature.hpp"
#include "gblab/random_fields.hpp"
#include "gblab/reduction.hpp"
#include "gblab/resonance.hpp"
#include "gblab/runner.hpp"
#include "gblab/solver.hpp"
#include "gblab/spectrum_io.hpp"
#include "gblab/stats.hpp"
