#pragma once

#include "densecorr/atlas.hpp"
#include "densecorr/dataset.hpp"
#include "densecorr/decoder.hpp"
#include "densecorr/error.hpp"
#include "densecorr/geodesic.hpp"
#include "densecorr/http.hpp"
#include "densecorr/image.hpp"
#include "densecorr/mds.hpp"
#include "densecorr/mesh.hpp"
#include "densecorr/metrics.hpp"
#include "densecorr/render.hpp"
#include "densecorr/sampler.hpp"
#include "densecorr/service.hpp"
#include "densecorr/surface_point.hpp"
#include "densecorr/texture.hpp"
#include "densecorr/view_io.hpp"
