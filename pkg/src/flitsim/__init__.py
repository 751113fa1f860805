"""Reliability simulator for 256-byte CXL flits, with implicit sequence numbers.

Layers, bottom up: :mod:`~flitsim.crc` and :mod:`~flitsim.flit` (flit
layout, CRC, ISN folding), :mod:`~flitsim.fec` (interleaved shortened RS),
:mod:`~flitsim.channel` (error injection), :mod:`~flitsim.link`
(go-back-N endpoints), :mod:`~flitsim.switch`, :mod:`~flitsim.engine`
(slotted simulation), :mod:`~flitsim.analytics` (closed forms) and
:mod:`~flitsim.cli`.
"""

__version__ = "0.1.0"
