/*@ ghost int state_d1  = 0; */
/*@ ghost int state_d8  = 0; */
/*@ ghost int state_d15 = 0; */

int open(const char *path, int oflag, ...) {
    int ret = hal_open(path, oflag);

    /*@ ghost state_d1 = 1; */
    /*@ ghost state_d8 = 1; */
    return ret;
}

int ioctl(int fd, int request, ...) {
    if (request == WR_MODE32) {
        /*@ assert(state_d8 == 1); */
    }

    int ret = hal_ioctl(fd, request);

    /*@ ghost state_d15 = 1; */
    return ret;
}

ssize_t read(int fd, void *buf, size_t nbyte) {
    /*@ assert(state_d1  == 1); */
    /*@ assert(state_d15 == 1); */

    return hal_read(fd, buf, nbyte);
}
