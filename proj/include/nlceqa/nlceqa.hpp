#pragma once

#include "ansatz.hpp"
#include "circuit.hpp"
#include "concurrency.hpp"
#include "config.hpp"
#include "ed.hpp"
#include "io.hpp"
#include "measurement.hpp"
#include "model.hpp"
#include "nlce.hpp"
#include "pauli.hpp"
#include "pcat.hpp"
#include "pipeline.hpp"
#include "records.hpp"
#include "rng.hpp"
#include "simulator.hpp"
#include "state.hpp"
#include "uncertainty.hpp"
#include "vqe.hpp"
