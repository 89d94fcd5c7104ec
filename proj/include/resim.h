/* C interface of the resim real-to-sim reconstruction engine.
 *
 * All pipeline entry points take a JSON configuration document (text) and
 * write their artifacts into the directory named by the config's "out" key.
 * Errors are reported as status codes; resim_last_error() returns a
 * thread-local human-readable message for the most recent failure.
 */
#ifndef RESIM_H
#define RESIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RESIM_API __declspec(dllexport)
#else
#define RESIM_API __attribute__((visibility("default")))
#endif

typedef enum resim_status {
  RESIM_OK = 0,
  RESIM_ERR_CONFIG = 1,    /* malformed or inconsistent configuration */
  RESIM_ERR_IO = 2,        /* missing files, serialization failures */
  RESIM_ERR_NUMERICAL = 3, /* non-finite loss or gradient */
  RESIM_ERR_SHAPE = 4,     /* mismatched sizes */
  RESIM_ERR_STATE = 5,     /* stale retained state */
  RESIM_ERR_UNKNOWN = 6
} resim_status;

RESIM_API const char* resim_version(void);
RESIM_API const char* resim_status_name(resim_status status);
RESIM_API const char* resim_last_error(void);
RESIM_API void resim_set_threads(int n); /* 0 = hardware concurrency */

/* Pipeline commands (see README for the config schemas). */
RESIM_API resim_status resim_cmd_gen(const char* config_json);
RESIM_API resim_status resim_cmd_reconstruct(const char* config_json);
RESIM_API resim_status resim_cmd_calibrate(const char* config_json);
RESIM_API resim_status resim_cmd_eval(const char* config_json);
RESIM_API resim_status resim_cmd_export(const char* config_json);
RESIM_API resim_status resim_cmd_render(const char* config_json);

/* Handle-level access for embedding. */

/* World-space gaussian splat asset loaded from an interchange PLY. */
typedef struct resim_splat resim_splat;

RESIM_API resim_status resim_splat_load(const char* splat_ply, resim_splat** out);
RESIM_API void resim_splat_destroy(resim_splat* splat);
RESIM_API int64_t resim_splat_count(const resim_splat* splat);

/* Renders the asset as RGB. rotation/translation describe world_to_camera
 * (row-major 3x3, then 3). out_rgb must hold width*height*3 doubles and is
 * filled row-major in [0,1]. */
RESIM_API resim_status resim_splat_render(const resim_splat* splat, const double rotation[9],
                                          const double translation[3], double fx, double fy,
                                          double cx, double cy, int width, int height,
                                          double* out_rgb);

/* Kinematic chain loaded from the chain JSON schema. */
typedef struct resim_chain resim_chain;

RESIM_API resim_status resim_chain_load(const char* json_path, resim_chain** out);
RESIM_API void resim_chain_destroy(resim_chain* chain);
RESIM_API int resim_chain_joint_count(const resim_chain* chain);
RESIM_API int resim_chain_tcp_count(const resim_chain* chain);

/* Forward kinematics of the TCP sites; out_xyz holds tcp_count*3 doubles. */
RESIM_API resim_status resim_chain_tcp_positions(const resim_chain* chain, const double* q,
                                                 int nq, double* out_xyz);

/* Symmetric Chamfer distance (mm^2) between two point sets given in mm. */
RESIM_API resim_status resim_chamfer_mm2(const double* a_xyz_mm, int64_t na,
                                         const double* b_xyz_mm, int64_t nb, double* out_mm2);

#ifdef __cplusplus
}
#endif

#endif /* RESIM_H */
