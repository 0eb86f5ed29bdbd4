# Copyright 2026 The MPE-PSN Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Parallel spiking neuron with membrane-potential estimation.

Thin numpy front end over the C++ core. Spiking tensors are float64 arrays
of shape [T, B, N] (time, batch, features).
"""

try:
    from . import _mpe_psn as _core
except ImportError:  # in-tree build: the extension sits on PYTHONPATH
    import _mpe_psn as _core

lif_sequential = _core.lif_sequential
estimate_u_hat = _core.estimate_u_hat
mpe_psn_forward = _core.mpe_psn_forward
teacher_forced_forward = _core.teacher_forced_forward
surrogate_grad = _core.surrogate_grad
mem_loss = _core.mem_loss
cls_loss = _core.cls_loss
total_loss = _core.total_loss
spike_rate_percent = _core.spike_rate_percent
generate = _core.generate
time_forward = _core.time_forward
DivergenceError = _core.DivergenceError

__all__ = [
    "lif_sequential",
    "estimate_u_hat",
    "mpe_psn_forward",
    "teacher_forced_forward",
    "surrogate_grad",
    "mem_loss",
    "cls_loss",
    "total_loss",
    "spike_rate_percent",
    "generate",
    "time_forward",
    "DivergenceError",
]
