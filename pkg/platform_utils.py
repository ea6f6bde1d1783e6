import os
import platform
import sys

import psutil


class PlatformUtils:
    @staticmethod
    def peak_rss_mb():
        """Resident set size of this process in MiB (peak where the OS reports it)"""
        info = psutil.Process(os.getpid()).memory_info()
        # peak_wset on Windows, rss elsewhere
        peak = getattr(info, 'peak_wset', None) or info.rss
        return round(peak / (1024 * 1024), 2)

    @staticmethod
    def get_system_info():
        return {
            'system': platform.system(),
            'release': platform.release(),
            'machine': platform.machine(),
            'python_version': sys.version.split()[0],
            'cpu_count': psutil.cpu_count(logical=True),
            'total_memory_mb': round(psutil.virtual_memory().total / (1024 * 1024), 2),
            'peak_rss_mb': PlatformUtils.peak_rss_mb(),
        }
