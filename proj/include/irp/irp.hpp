#pragma once

// Umbrella header for the image-seeking intent prediction library.

#include "irp/checkpoint.hpp"
#include "irp/config_json.hpp"
#include "irp/domain.hpp"
#include "irp/losses.hpp"
#include "irp/model.hpp"
#include "irp/optimizer.hpp"
#include "irp/pipeline.hpp"
#include "irp/rng.hpp"
#include "irp/server.hpp"
#include "irp/summarize.hpp"
#include "irp/synthetic.hpp"
#include "irp/tape.hpp"
#include "irp/tensor.hpp"
#include "irp/text.hpp"
#include "irp/train.hpp"
