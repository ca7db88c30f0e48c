#pragma once

#include "abbl/attribute.hpp"
#include "abbl/error.hpp"
#include "abbl/evaluation.hpp"
#include "abbl/expr.hpp"
#include "abbl/inference.hpp"
#include "abbl/io.hpp"
#include "abbl/knowledge.hpp"
#include "abbl/ontology.hpp"
#include "abbl/posterior.hpp"
#include "abbl/random.hpp"
#include "abbl/report.hpp"
#include "abbl/rules.hpp"
#include "abbl/scenario.hpp"
#include "abbl/scoring.hpp"
#include "abbl/simulation.hpp"
#include "abbl/workspace.hpp"
#include "abbl/worldview.hpp"
