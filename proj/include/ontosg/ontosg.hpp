#pragma once

#include "ontosg/baseline.hpp"
#include "ontosg/dataset.hpp"
#include "ontosg/error.hpp"
#include "ontosg/metrics.hpp"
#include "ontosg/ontology.hpp"
#include "ontosg/postproc.hpp"
#include "ontosg/reasoner.hpp"
