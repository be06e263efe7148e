#pragma once

#include "distress/common.hpp"
#include "distress/io.hpp"
#include "distress/corpus.hpp"
#include "distress/pvdm.hpp"
#include "distress/fusion.hpp"
#include "distress/neural.hpp"
#include "distress/eval.hpp"
#include "distress/experiment.hpp"
#include "distress/synth.hpp"
