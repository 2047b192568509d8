from .algorithms import (ADAM_LR, SGD_LR, baseline_epoch, baseline_step, evaluate, full_gradient,
                         gsadmm_epoch, gsadmm_step, gsam_epoch, gsam_step)
from .objectives import augmented_lagrangian, composed_loss, constraint_residual, objective_F, penalty_omega
from .state import (AdamSlot, AuxState, EpochMode, Hyperparams, InnerOpt, Mode, TrainState, epoch_batches,
                    init_aux, sample_batch)
from .updates import (grad_p_gsadmm, grad_p_gsam, update_duals, update_p_gsadmm, update_p_gsam,
                      update_q_closed_form, update_weights)
