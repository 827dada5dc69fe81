#pragma once

#include "hicl/bench.hpp"
#include "hicl/common.hpp"
#include "hicl/config.hpp"
#include "hicl/encoder.hpp"
#include "hicl/label_space.hpp"
#include "hicl/matrix.hpp"
#include "hicl/mesh.hpp"
#include "hicl/mesh_xml.hpp"
#include "hicl/metrics.hpp"
#include "hicl/objective.hpp"
#include "hicl/optimizer.hpp"
#include "hicl/pair_mining.hpp"
#include "hicl/serialize.hpp"
#include "hicl/synthetic.hpp"
#include "hicl/trainer.hpp"
