"""License-plate recognition pipeline, desk scale: grammar-driven plate
synthesis, unpaired style translation, sequence recognition with a
connectionist temporal classification objective, and the evaluation and
cost tooling around them.

Heavy kernels run through a compiled path by default; set
PLATEKIT_NO_NUMBA=1 to force the plain array implementation.
"""

__version__ = "0.1.0"

from .accel import USE_NUMBA
from .alphabet import (Alphabet, load_alphabet, make_standard_alphabet,
                       make_toy_alphabet, save_alphabet)
from .costmodel import (CostBreakdown, conv_cost_separable, conv_cost_standard,
                        cost_ratio, count_macs)
from .ctc import (beam_search_topn, best_path_decode,
                  brute_force_label_probability, collapse, ctc_loss,
                  min_frames, path_probability)
from .errors import PlatekitError
from .gan import (CycleModels, GanConfig, build_cycle_generator, build_dcgan,
                  build_patch_discriminator, clip_params, cycle_loss,
                  ensemble_translate, lsgan_loss, sample_dcgan,
                  total_objective, train_cyclegan, train_dcgan, translate,
                  wgan_loss)
from .gradcheck import finite_diff_check, numeric_grad, rel_error
from .metrics import (EvalReport, character_recognition_accuracy,
                      confidence_map, evaluate, levenshtein,
                      recognition_accuracy, topn_accuracy)
from .networks import (Recognizer, build_crnn, build_lightcrnn,
                       load_checkpoint, param_count, round_channels,
                       save_checkpoint)
from .optim import SGD, Adadelta, Adam, RMSProp
from .pipeline import (all_in_one_mix, domain_proxy, train_recognizer)
from .plates import (generate_dataset, render_plate, sample_plate_string,
                     validate_plate)
from .tensor import derive_rng, make_rng
