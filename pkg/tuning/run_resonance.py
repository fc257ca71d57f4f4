import time, json
from nlslab.io import load_config
from nlslab.experiments import run_scenario
cfg = load_config()
cfg['scenario']['kind'] = 'resonance'
t0 = time.time()
rec = run_scenario(cfg, out_dir='/tmp/full_res')
print('wall %.0fs' % (time.time()-t0))
print(json.dumps(rec.as_dict(), indent=1, default=str))
