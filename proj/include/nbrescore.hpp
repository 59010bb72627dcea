#pragma once

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/first_pass.hpp"
#include "nbrescore/corpus/generator.hpp"
#include "nbrescore/corpus/io.hpp"
#include "nbrescore/corpus/lexicon.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/corpus/vocabulary.hpp"
#include "nbrescore/eval/edit_distance.hpp"
#include "nbrescore/eval/grid.hpp"
#include "nbrescore/eval/metrics.hpp"
#include "nbrescore/eval/report.hpp"
#include "nbrescore/nnet/checkpoint.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/nnet/scoring.hpp"
#include "nbrescore/nnet/tape.hpp"
#include "nbrescore/nnet/tensor.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/textproc/augment.hpp"
#include "nbrescore/textproc/matcher.hpp"
#include "nbrescore/textproc/phonetic.hpp"
#include "nbrescore/textproc/tokenize.hpp"
#include "nbrescore/training/adam.hpp"
#include "nbrescore/training/batching.hpp"
#include "nbrescore/training/mwer.hpp"
#include "nbrescore/training/trainer.hpp"
