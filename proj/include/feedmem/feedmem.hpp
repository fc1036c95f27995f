#pragma once

// Umbrella header for the whole library.

#include "feedmem/core.hpp"
#include "feedmem/chat.hpp"
#include "feedmem/memory_store.hpp"
#include "feedmem/tool_protocol.hpp"
#include "feedmem/model_backend.hpp"
#include "feedmem/wire_backend.hpp"
#include "feedmem/benchmark.hpp"
#include "feedmem/evaluator.hpp"
#include "feedmem/agent_runtime.hpp"
#include "feedmem/harness.hpp"
#include "feedmem/config.hpp"
