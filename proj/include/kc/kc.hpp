#pragma once

#include "kc/config.hpp"
#include "kc/correlator.hpp"
#include "kc/engine.hpp"
#include "kc/error.hpp"
#include "kc/fact_store.hpp"
#include "kc/ingest.hpp"
#include "kc/ontology.hpp"
#include "kc/reasoner.hpp"
#include "kc/rules.hpp"
#include "kc/scenario.hpp"
#include "kc/value.hpp"
