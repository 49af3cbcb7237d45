"""
absorption-qfi: second-order moments and quantum Fisher information for absorption
estimation with undetected photons (SU(1,1), induced coherence and distributed loss).
"""

__version__ = "0.1.0"
