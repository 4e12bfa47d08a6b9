#include <math.h>
#include <stdio.h>

#include "ionshuttle.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        IonshuttleStatus s_ = (call);                                      \
        if (s_ != IONSHUTTLE_STATUS_OK) {                                  \
            char msg_[256];                                                \
            ionshuttle_last_error(msg_, sizeof msg_);                      \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, msg_); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    const double masses[2] = {9.012, 23.985};
    IonshuttleChain *chain = NULL;
    IonshuttleTrajectory *traj = NULL;
    double omega[2], quanta[2], total = -1.0, residual = -1.0;

    CHECK(ionshuttle_chain_new(masses, 2, 2e6, &chain));
    CHECK(ionshuttle_chain_modes(chain, omega, NULL, NULL, NULL, 2));
    if (!(omega[0] < omega[1])) {
        fprintf(stderr, "modes not ascending\n");
        return 1;
    }
    CHECK(ionshuttle_trajectory_design(chain, 5e-6, 370e-6, &traj, &residual));
    CHECK(ionshuttle_uncoupled_excitation(chain, traj, quanta, 2, &total));
    if (!(quanta[0] < 1e-6 && quanta[1] < 1e-6 && residual < 1e-9)) {
        fprintf(stderr, "design not clean: %g %g %g\n", quanta[0], quanta[1], residual);
        return 1;
    }
    ionshuttle_trajectory_free(traj);
    traj = NULL;
    if (ionshuttle_trajectory_linear(-1.0, 1.0, &traj) != IONSHUTTLE_STATUS_INVALID_ARGUMENT || traj != NULL) {
        return 1;
    }
    ionshuttle_chain_free(chain);
    printf("ok %s\n", ionshuttle_version());
    return 0;
}
